//! The cost-player / policy-player game, its Frank-Wolfe specializations and
//! the constrained extension.
//!
//! Each iteration the cost player emits `lambda^k` from the history, the
//! policy player answers `d^k` for reward `-lambda^k`, and the answer is
//! `d_bar^K = (1/K) sum_k d^k`. The dual average `lambda_bar^K` only feeds the
//! lower bound `min_d L(d, lambda_bar) <= f^OPT`.

mod frank_wolfe;
mod trace;

pub use frank_wolfe::{run_frank_wolfe, run_fully_corrective_fw, StepRule};
pub use trace::{GameTrace, GapBounds, IterationRecord, TraceSummary};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostAlgorithm, CostError, CostPlayerState, LearningRate};
use crate::mdp::{MdpError, TabularMdp};
use crate::objectives::{linear_objective, neg_entropy_objective, ConvexObjective};
use crate::policy::{best_response, PolicyError, PolicyPlayer, PolicyPlayerConfig};
use crate::scalar::{dot, max_abs, Real};

/// Default box for the constraint multipliers.
pub const DEFAULT_MU_MAX: f64 = 100.0;

/// Accuracy of the exact best responses used for certificates.
pub const CERTIFICATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("iteration budget must be at least 1")]
    IterationBudgetZero,
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("objective `{0}` has no gradient")]
    GradientUnavailable(String),
    #[error("constraint `{0}` has no closed-form conjugate")]
    ConjugateUnavailable(String),
    #[error("constraint `{0}` failed the convexity spot check")]
    NonConvexConstraint(String),
    #[error("occupancy length {got} is not a multiple of the block size {block}")]
    BlockMismatch { block: usize, got: usize },
    #[error("all multipliers pinned at mu_max with positive residuals {residuals:?}")]
    InfeasibleSuspected { residuals: Vec<f64> },
    #[error("incompatible players: {0}")]
    IncompatiblePlayers(String),
}

/// Iterations at which certificates (gap, policy regret) are computed. The
/// final iteration is always included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    Every,
    PowersOfTwo,
    Final,
    List(Vec<usize>),
}

impl Checkpoints {
    pub fn contains(&self, k: usize, last: usize) -> bool {
        k == last
            || match self {
                Checkpoints::Every => true,
                Checkpoints::PowersOfTwo => k.is_power_of_two(),
                Checkpoints::Final => false,
                Checkpoints::List(ks) => ks.contains(&k),
            }
    }
}

#[derive(Debug, Clone)]
pub struct GameOptions<T> {
    pub checkpoints: Checkpoints,
    pub record_wall_time: bool,
    /// Extra points for grid estimates of `f*` when no closed form exists.
    pub conj_grid: Vec<Vec<T>>,
    pub certificate_tol: T,
    /// Point whose gradient sets the first FTL cost, in place of the
    /// block-uniform vector. Symmetric objectives need it to leave their
    /// symmetric critical point. Not part of any average.
    pub start: Option<Vec<T>>,
}

impl<T: Real> Default for GameOptions<T> {
    fn default() -> Self {
        Self {
            checkpoints: Checkpoints::PowersOfTwo,
            record_wall_time: false,
            conj_grid: Vec::new(),
            certificate_tol: T::tol(CERTIFICATE_TOL),
            start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Players<T> {
    pub cost: CostAlgorithm<T>,
    pub policy: PolicyPlayerConfig<T>,
    pub seed: u64,
}

impl<T: Real> Players<T> {
    pub fn ftl_best_response() -> Self {
        Self { cost: CostAlgorithm::Ftl, policy: PolicyPlayerConfig::exact(), seed: 0 }
    }
}

/// `g(d) = h(d) - offset <= 0`.
pub struct Constraint<T> {
    pub name: String,
    pub function: Box<dyn ConvexObjective<T>>,
    pub offset: T,
}

impl<T: Real> Constraint<T> {
    /// `a . d <= c`.
    pub fn linear(a: Vec<T>, c: T) -> Self {
        Self { name: "linear".into(), function: Box::new(linear_objective(a)), offset: c }
    }

    /// `H(d) >= c`, i.e. `sum d log d <= -c`.
    pub fn min_entropy(c: T) -> Self {
        Self { name: "entropy".into(), function: Box::new(neg_entropy_objective()), offset: -c }
    }

    pub fn value(&self, d: &[T]) -> T {
        self.function.value(d) - self.offset
    }

    /// `g*(y) = h*(y) + offset`.
    fn conjugate(&self, y: &[T]) -> T {
        self.function.conjugate(y).expect("validated closed form") + self.offset
    }
}

pub struct ConstraintSpec<T> {
    pub constraints: Vec<Constraint<T>>,
    pub mu_max: T,
    /// Ascent rate of the multipliers `mu`.
    pub mu_rate: LearningRate<T>,
    /// Player for the normalized constraint duals `y_i = zeta_i / mu_i`.
    pub dual_algorithm: Option<CostAlgorithm<T>>,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn none() -> Self {
        Self::new(Vec::new())
    }

    pub fn new(constraints: Vec<Constraint<T>>) -> Self {
        Self {
            constraints,
            mu_max: T::lit(DEFAULT_MU_MAX),
            mu_rate: LearningRate { c: T::one(), exponent: T::lit(0.5) },
            dual_algorithm: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), GameError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for c in &self.constraints {
            let probe = vec![T::zero(); dim];
            if c.function.conjugate(&probe).is_none() {
                return Err(GameError::ConjugateUnavailable(c.name.clone()));
            }
            if !c.function.is_convex() || !midpoint_convex(&*c.function, dim, &mut rng) {
                return Err(GameError::NonConvexConstraint(c.name.clone()));
            }
        }
        Ok(())
    }
}

/// Midpoint inequality on random pairs of simplex points.
fn midpoint_convex<T: Real, O: ConvexObjective<T> + ?Sized>(f: &O, dim: usize, rng: &mut ChaCha8Rng) -> bool {
    use rand_distr::{Distribution, Exp1};
    let mut point = || {
        let w: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|&x| T::lit(x / s)).collect::<Vec<T>>()
    };
    (0..8).all(|_| {
        let (a, b) = (point(), point());
        let mid: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| (x + y) / T::lit(2.0)).collect();
        let chord = (f.value(&a) + f.value(&b)) / T::lit(2.0);
        f.value(&mid) <= chord + T::tol(1e-9) * (T::one() + chord.abs())
    })
}

/// `lambda . d - f_hat*(lambda)` with `f_hat*` the grid estimate.
pub fn lagrangian_value<T: Real, O: ConvexObjective<T> + ?Sized>(
    d: &[T],
    lambda: &[T],
    objective: &O,
    conj_grid: &[Vec<T>],
) -> T {
    dot(lambda, d) - crate::objectives::fenchel_conjugate_check(objective, lambda, conj_grid)
}

/// `max_x (y . x - f(x))` over the given points.
fn grid_conjugate<'a, T: Real + 'a, O: ConvexObjective<T> + ?Sized>(
    objective: &O,
    y: &[T],
    points: impl IntoIterator<Item = &'a [T]>,
) -> T {
    points.into_iter().map(|x| dot(y, x) - objective.value(x)).fold(T::neg_infinity(), T::max)
}

/// `min_{d in K^Z} lambda . d` by one exact best response per block.
fn min_linear<T: Real>(mdp: &TabularMdp<T>, lambda: &[T], tol: T) -> Result<(T, Vec<T>), GameError> {
    let block = mdp.dim();
    if !lambda.len().is_multiple_of(block) || lambda.is_empty() {
        return Err(GameError::BlockMismatch { block, got: lambda.len() });
    }
    let scale = max_abs(lambda).max(T::min_positive_value());
    let mut d = Vec::with_capacity(lambda.len());
    for chunk in lambda.chunks(block) {
        let r: Vec<T> = chunk.iter().map(|&l| -l / scale).collect();
        d.extend_from_slice(best_response(mdp, &r, tol)?.occupancy.values());
    }
    Ok((dot(lambda, &d), d))
}

pub(crate) fn uniform_start<T: Real>(dim: usize, blocks: usize) -> Vec<T> {
    vec![T::from_usize_lossy(blocks) / T::from_usize_lossy(dim); dim]
}

fn add_into<T: Real>(acc: &mut [T], x: &[T], w: T) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += w * v;
    }
}

fn scaled<T: Real>(x: &[T], s: T) -> Vec<T> {
    x.iter().map(|&v| v * s).collect()
}

/// Shared per-iteration accounting for all game drivers.
pub(crate) struct Book<'a, T, O: ?Sized> {
    mdp: &'a TabularMdp<T>,
    objective: &'a O,
    options: &'a GameOptions<T>,
    last: usize,
    start: Instant,
    records: Vec<IterationRecord<T>>,
    sum_lambda: Vec<T>,
    sum_lagrangian: T,
    sum_lambda_dot_d: T,
    estimate: bool,
}

/// Everything the driver knows about iteration `k` once `d^k` is in.
pub(crate) struct Step<'s, T> {
    pub lambda: Vec<T>,
    pub d: Vec<T>,
    pub lagrangian: T,
    pub d_bar: &'s [T],
    pub residuals: Vec<T>,
    /// `max` over the (boxed) dual set of the averaged Lagrangian at `d_bar`.
    pub primal_upper: T,
    pub samples: usize,
}

impl<'a, T: Real, O: ConvexObjective<T> + ?Sized> Book<'a, T, O> {
    pub(crate) fn new(mdp: &'a TabularMdp<T>, objective: &'a O, options: &'a GameOptions<T>, last: usize, dim: usize) -> Self {
        Self {
            mdp,
            objective,
            options,
            last,
            start: Instant::now(),
            records: Vec::with_capacity(last),
            sum_lambda: vec![T::zero(); dim],
            sum_lagrangian: T::zero(),
            sum_lambda_dot_d: T::zero(),
            estimate: false,
        }
    }

    /// `f*(y)`: closed form, else the estimate over the option grid and `extra`.
    pub(crate) fn conj_f(&mut self, y: &[T], extra: &[&[T]]) -> T {
        if let Some(c) = self.objective.conjugate(y) {
            return c;
        }
        self.estimate = true;
        let grid = self.options.conj_grid.iter().map(Vec::as_slice).chain(extra.iter().copied());
        grid_conjugate(self.objective, y, grid)
    }

    fn conj_f_history(&mut self, y: &[T], extra: &[&[T]]) -> T {
        if let Some(c) = self.objective.conjugate(y) {
            return c;
        }
        self.estimate = true;
        let grid = self
            .options
            .conj_grid
            .iter()
            .map(Vec::as_slice)
            .chain(self.records.iter().map(|r| r.d.as_slice()))
            .chain(extra.iter().copied());
        grid_conjugate(self.objective, y, grid)
    }

    pub(crate) fn lambda_bar(&self) -> Vec<T> {
        scaled(&self.sum_lambda, T::one() / T::from_usize_lossy(self.records.len().max(1)))
    }

    /// Logs iteration `k = records + 1`. At checkpoints `dual` may supply
    /// `(nu_bar, constraint_offset)` for the lower bound
    /// `min_d lambda_bar . d - f*(nu_bar) - constraint_offset`; `None` means
    /// `nu_bar = lambda_bar` and no constraints.
    pub(crate) fn push(
        &mut self,
        step: Step<'_, T>,
        dual: impl FnOnce() -> Option<(Vec<T>, T)>,
    ) -> Result<(), GameError> {
        let k = self.records.len() + 1;
        add_into(&mut self.sum_lambda, &step.lambda, T::one());
        self.sum_lagrangian += step.lagrangian;
        self.sum_lambda_dot_d += dot(&step.lambda, &step.d);
        let kk = T::from_usize_lossy(k);
        let regret_lambda = step.primal_upper - self.sum_lagrangian / kk;
        let (mut gap, mut regret_pi) = (None, None);
        if self.options.checkpoints.contains(k, self.last) {
            let lambda_bar = scaled(&self.sum_lambda, T::one() / kk);
            let (best, d_br) = min_linear(self.mdp, &lambda_bar, self.options.certificate_tol)?;
            regret_pi = Some(self.sum_lambda_dot_d / kk - best);
            let (nu_bar, offset) = dual().unwrap_or((lambda_bar, T::zero()));
            let conj = self.conj_f_history(&nu_bar, &[step.d_bar, &d_br, &step.d]);
            gap = Some(GapBounds { lower: best - conj - offset, upper: step.primal_upper });
        }
        let ms = if self.options.record_wall_time { self.start.elapsed().as_millis() as u64 } else { 0 };
        self.records.push(IterationRecord {
            k,
            lambda: step.lambda,
            d: step.d,
            lagrangian: step.lagrangian,
            f_bar: self.objective.value(step.d_bar),
            gap,
            regret_pi,
            regret_lambda,
            residuals: step.residuals,
            samples: step.samples,
            ms,
        });
        Ok(())
    }

    pub(crate) fn finish(mut self, d_bar: Vec<T>, weights: Option<Vec<T>>, cost_bound: T, mu_bar: Vec<T>, budget_warnings: usize) -> GameTrace<T> {
        let lambda_bar = self.lambda_bar();
        let nonconvex_bounds = if self.objective.is_convex() {
            None
        } else {
            let conj = self.conj_f_history(&lambda_bar, &[&d_bar]);
            Some(GapBounds { lower: dot(&lambda_bar, &d_bar) - conj, upper: self.objective.value(&d_bar) })
        };
        GameTrace {
            records: self.records,
            d_bar,
            lambda_bar,
            weights,
            lagrangian_is_estimate: self.estimate,
            cost_bound,
            mu_bar,
            nonconvex_bounds,
            budget_warnings,
        }
    }
}

/// Derives the seed for block `z` of a stacked game.
fn block_seed(seed: u64, z: usize) -> u64 {
    seed ^ (z as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Algorithm 1 with `objective`, returning averages and the full trace.
pub fn run_game<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    players: &Players<T>,
    iterations: usize,
    options: &GameOptions<T>,
) -> Result<GameTrace<T>, GameError> {
    run_constrained_game(mdp, objective, &ConstraintSpec::none(), players, iterations, options)
}

/// Three-player Lagrangian game for `min f(d) s.t. g_i(d) <= 0`.
///
/// With `zeta_i = mu_i y_i` the perspective term `mu_i g_i*(zeta_i / mu_i)`
/// becomes `mu_i g_i*(y_i)` and vanishes with `mu_i`. The `y_i` are played
/// by mirror-ascent players on `g_i` (fixed at `a_i` for linear `g_i`), the
/// multipliers by projected ascent on `[0, mu_max]`, and the policy player
/// sees `nu + sum_i mu_i y_i`.
pub fn run_constrained_game<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    spec: &ConstraintSpec<T>,
    players: &Players<T>,
    iterations: usize,
    options: &GameOptions<T>,
) -> Result<GameTrace<T>, GameError> {
    if iterations == 0 {
        return Err(GameError::IterationBudgetZero);
    }
    let blocks = objective.blocks().max(1);
    let block = mdp.dim();
    let dim = block * blocks;
    let m = spec.constraints.len();
    if m > 0 && blocks > 1 {
        return Err(GameError::IncompatiblePlayers("constraints on stacked occupancies".into()));
    }
    spec.validate(dim)?;

    let mut cost = CostPlayerState::new(players.cost.clone(), objective, dim)?;
    if let Some(start) = &options.start {
        cost.set_start(start.clone())?;
    }
    let mut duals = spec
        .constraints
        .iter()
        .map(|c| {
            let alg = spec.dual_algorithm.clone().unwrap_or_else(|| CostAlgorithm::Omd {
                bregman: crate::cost::Bregman::L2,
                rate: LearningRate::default_for(c.function.grad_bound(), dim),
            });
            CostPlayerState::new(alg, &*c.function, dim)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut policy = (0..blocks)
        .map(|z| PolicyPlayer::new(players.policy.clone(), mdp, block_seed(players.seed, z)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut book = Book::new(mdp, objective, options, iterations, dim);
    let mut mu = vec![T::zero(); m];
    let mut sum_d = vec![T::zero(); dim];
    let mut sum_nu = vec![T::zero(); dim];
    let mut sum_mu = vec![T::zero(); m];
    let mut sum_zeta = vec![vec![T::zero(); dim]; m];
    let mut samples = 0;
    let mut warnings = 0;
    let mut pinned_since: Option<usize> = None;
    let fixed_bound = cost.bound();

    for k in 1..=iterations {
        let nu = cost.next_cost(objective)?.values;
        let ys = duals
            .iter_mut()
            .zip(&spec.constraints)
            .map(|(p, c)| p.next_cost(&*c.function).map(|v| v.values))
            .collect::<Result<Vec<_>, _>>()?;
        let mut lambda = nu.clone();
        for (y, &mi) in ys.iter().zip(&mu) {
            add_into(&mut lambda, y, mi);
        }
        // Without constraints the declared bound keeps the reward scale fixed.
        let bound = if m == 0 { fixed_bound } else { max_abs(&lambda).max(T::min_positive_value()) };
        let reward: Vec<T> = lambda.iter().map(|&l| -l / bound).collect();
        let mut d = Vec::with_capacity(dim);
        for (player, r) in policy.iter_mut().zip(reward.chunks(block)) {
            let resp = player.respond(mdp, r)?;
            samples += resp.samples;
            warnings += usize::from(resp.budget_too_small);
            d.extend_from_slice(resp.occupancy.values());
        }
        cost.observe(&d)?;
        for p in duals.iter_mut() {
            p.observe(&d)?;
        }
        add_into(&mut sum_d, &d, T::one());
        let kk = T::from_usize_lossy(k);
        let d_bar = scaled(&sum_d, T::one() / kk);

        let mut lagrangian = dot(&nu, &d) - book.conj_f(&nu, &[&d, &d_bar]);
        let rate = spec.mu_rate.at(k);
        for i in 0..m {
            let gi = dot(&ys[i], &d) - spec.constraints[i].conjugate(&ys[i]);
            lagrangian += mu[i] * gi;
            add_into(&mut sum_zeta[i], &ys[i], mu[i]);
            sum_mu[i] += mu[i];
            mu[i] = (mu[i] + rate * gi).max(T::zero()).min(spec.mu_max);
        }
        add_into(&mut sum_nu, &nu, T::one());

        let residuals: Vec<T> = spec.constraints.iter().map(|c| c.value(&d_bar)).collect();
        let excess: T = residuals.iter().map(|&r| r.max(T::zero())).sum();
        let primal_upper = objective.value(&d_bar) + spec.mu_max * excess;

        let pinned = m > 0
            && mu.iter().all(|&x| x >= spec.mu_max)
            && residuals.iter().all(|&r| r > T::zero());
        pinned_since = if pinned { pinned_since.or(Some(k)) } else { None };

        book.push(
            Step { lambda, d, lagrangian, d_bar: &d_bar, residuals, primal_upper, samples },
            || {
                let nu_bar = scaled(&sum_nu, T::one() / kk);
                let offset = (0..m)
                    .map(|i| {
                        let mb = sum_mu[i] / kk;
                        if mb > T::zero() {
                            let y_bar = scaled(&sum_zeta[i], T::one() / sum_mu[i]);
                            mb * spec.constraints[i].conjugate(&y_bar)
                        } else {
                            T::zero()
                        }
                    })
                    .sum();
                Some((nu_bar, offset))
            },
        )?;
    }

    let kk = T::from_usize_lossy(iterations);
    let d_bar = scaled(&sum_d, T::one() / kk);
    if let Some(since) = pinned_since {
        if iterations - since + 1 >= iterations.div_ceil(4) {
            let residuals = spec.constraints.iter().map(|c| c.value(&d_bar).to_f64_lossy()).collect();
            return Err(GameError::InfeasibleSuspected { residuals });
        }
    }
    let mu_bar = scaled(&sum_mu, T::one() / kk);
    Ok(book.finish(d_bar, None, fixed_bound, mu_bar, warnings))
}

/// `(lower, upper)` for a completed unconstrained trace: `upper = f(d_bar)`,
/// `lower = min_d lambda_bar . d - f*(lambda_bar)`.
pub fn duality_gap<T: Real, O: ConvexObjective<T> + ?Sized>(
    trace: &GameTrace<T>,
    objective: &O,
    mdp: &TabularMdp<T>,
) -> Result<GapBounds<T>, GameError> {
    let (best, d_br) = min_linear(mdp, &trace.lambda_bar, T::tol(CERTIFICATE_TOL))?;
    let conj = objective.conjugate(&trace.lambda_bar).unwrap_or_else(|| {
        let grid = trace
            .records
            .iter()
            .map(|r| r.d.as_slice())
            .chain([trace.d_bar.as_slice(), d_br.as_slice()]);
        grid_conjugate(objective, &trace.lambda_bar, grid)
    });
    Ok(GapBounds { lower: best - conj, upper: objective.value(&trace.d_bar) })
}

/// Comparator for the regret of a policy player on a fixed cost sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretBenchmark {
    /// Best fixed occupancy for the summed costs.
    Hindsight,
    /// Best response to each revealed cost, round by round.
    PerRound,
}

/// Average regret of a policy player facing `costs(k)` for `k = 1..=K`
/// at each checkpoint. Realized values use the exact occupancy of the
/// policy played, so sampling noise enters only through that policy.
pub fn policy_regret_on_sequence<T: Real>(
    mdp: &TabularMdp<T>,
    config: &PolicyPlayerConfig<T>,
    seed: u64,
    iterations: usize,
    checkpoints: &Checkpoints,
    benchmark: RegretBenchmark,
    mut costs: impl FnMut(usize) -> Vec<T>,
) -> Result<Vec<(usize, T)>, GameError> {
    if iterations == 0 {
        return Err(GameError::IterationBudgetZero);
    }
    let tol = T::tol(CERTIFICATE_TOL);
    let mut player = PolicyPlayer::new(config.clone(), mdp, seed)?;
    let mut sum_lambda = vec![T::zero(); mdp.dim()];
    let mut realized = T::zero();
    let mut per_round_best = T::zero();
    let mut out = Vec::new();
    for k in 1..=iterations {
        let lambda = costs(k);
        let bound = max_abs(&lambda).max(T::min_positive_value()).max(T::one());
        let reward: Vec<T> = lambda.iter().map(|&l| -l / bound).collect();
        let resp = player.respond(mdp, &reward)?;
        realized += dot(&lambda, resp.occupancy.values());
        match benchmark {
            RegretBenchmark::Hindsight => add_into(&mut sum_lambda, &lambda, T::one()),
            RegretBenchmark::PerRound => per_round_best += min_linear(mdp, &lambda, tol)?.0,
        }
        if checkpoints.contains(k, iterations) {
            let best = match benchmark {
                RegretBenchmark::Hindsight => min_linear(mdp, &sum_lambda, tol)?.0,
                RegretBenchmark::PerRound => per_round_best,
            };
            out.push((k, (realized - best) / T::from_usize_lossy(k)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
