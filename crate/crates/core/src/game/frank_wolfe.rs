//! Frank-Wolfe and fully-corrective Frank-Wolfe over the occupancy polytope.
//!
//! The linear minimization oracle is an exact best response to `-grad f`,
//! on the same normalized scale the game hands to a best-response player.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{uniform_start, Book, GameError, GameOptions, GameTrace, Step};
use crate::cost::{project_simplex, CostVector};
use crate::mdp::TabularMdp;
use crate::objectives::ConvexObjective;
use crate::policy::{best_response, EXACT_TOL};
use crate::scalar::{dot, Real};

/// Step size `alpha_k` of `d_bar <- (1 - alpha_k) d_bar + alpha_k d`, `k = 0, 1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `2 / (k + 2)`.
    Standard,
    /// `1 / (k + 1)`: the running mean.
    Avg,
}

impl StepRule {
    fn alpha<T: Real>(self, k: usize) -> T {
        match self {
            StepRule::Standard => T::lit(2.0) / T::from_usize_lossy(k + 2),
            StepRule::Avg => T::one() / T::from_usize_lossy(k + 1),
        }
    }
}

/// `(grad f(d_bar), argmin_{d in K^Z} grad f(d_bar) . d)`.
fn oracle<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    d_bar: &[T],
) -> Result<(Vec<T>, Vec<T>), GameError> {
    let g = objective
        .gradient(d_bar)
        .ok_or_else(|| GameError::GradientUnavailable(objective.name().into()))?;
    let cost = CostVector { values: g, bound: objective.grad_bound() };
    let reward = cost.normalized_reward();
    let mut d = Vec::with_capacity(d_bar.len());
    for r in reward.chunks(mdp.dim()) {
        d.extend_from_slice(best_response(mdp, r, T::tol(EXACT_TOL))?.occupancy.values());
    }
    Ok((cost.values, d))
}

fn checked_dim<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    iterations: usize,
) -> Result<usize, GameError> {
    if iterations == 0 {
        return Err(GameError::IterationBudgetZero);
    }
    let blocks = objective.blocks().max(1);
    let dim = mdp.dim() * blocks;
    if objective.gradient(&uniform_start(dim, blocks)).is_none() {
        return Err(GameError::GradientUnavailable(objective.name().into()));
    }
    Ok(dim)
}

fn log_step<T: Real, O: ConvexObjective<T> + ?Sized>(
    book: &mut Book<'_, T, O>,
    objective: &O,
    lambda: Vec<T>,
    d: Vec<T>,
    d_bar: &[T],
) -> Result<(), GameError> {
    let lagrangian = dot(&lambda, &d) - book.conj_f(&lambda, &[&d, d_bar]);
    let primal_upper = objective.value(d_bar);
    book.push(
        Step { lambda, d, lagrangian, d_bar, residuals: Vec::new(), primal_upper, samples: 0 },
        || None,
    )
}

/// Frank-Wolfe from the uniform vector: `d^{k+1} = argmin_d grad f(d_bar^k) . d`.
pub fn run_frank_wolfe<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    iterations: usize,
    rule: StepRule,
    options: &GameOptions<T>,
) -> Result<GameTrace<T>, GameError> {
    let dim = checked_dim(mdp, objective, iterations)?;
    let mut d_bar = uniform_start(dim, objective.blocks().max(1));
    let mut weights: Vec<T> = Vec::with_capacity(iterations);
    let mut book = Book::new(mdp, objective, options, iterations, dim);
    for k in 0..iterations {
        let (lambda, d) = oracle(mdp, objective, &d_bar)?;
        let alpha: T = rule.alpha(k);
        for (b, &x) in d_bar.iter_mut().zip(&d) {
            *b = (T::one() - alpha) * *b + alpha * x;
        }
        for w in weights.iter_mut() {
            *w *= T::one() - alpha;
        }
        weights.push(alpha);
        log_step(&mut book, objective, lambda, d, &d_bar)?;
    }
    Ok(book.finish(d_bar, Some(weights), objective.grad_bound(), Vec::new(), 0))
}

fn combine<T: Real>(vertices: &[Vec<T>], w: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); vertices[0].len()];
    for (v, &wi) in vertices.iter().zip(w) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += wi * x;
        }
    }
    out
}

/// `grad_w f(V w) = V^T grad f(V w)`.
fn weight_gradient<T: Real, O: ConvexObjective<T> + ?Sized>(objective: &O, vertices: &[Vec<T>], w: &[T]) -> Vec<T> {
    let g = objective.gradient(&combine(vertices, w)).expect("checked smooth");
    vertices.iter().map(|v| dot(v, &g)).collect()
}

fn random_weights<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&x| T::lit(x / s)).collect()
}

/// Largest observed `|grad(w1) - grad(w2)| / |w1 - w2|` over sampled pairs.
fn lipschitz_estimate<T: Real, O: ConvexObjective<T> + ?Sized>(
    objective: &O,
    vertices: &[Vec<T>],
    w: &[T],
    rng: &mut ChaCha8Rng,
) -> T {
    let n = vertices.len();
    let norm = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt();
    let mut pairs: Vec<(Vec<T>, Vec<T>)> = (0..8).map(|_| (random_weights(n, rng), random_weights(n, rng))).collect();
    let mut last = vec![T::zero(); n];
    last[n - 1] = T::one();
    pairs.push((w.to_vec(), last));
    let est = pairs
        .iter()
        .filter_map(|(a, b)| {
            let dw = norm(a, b);
            (dw > T::tol(1e-12)).then(|| {
                norm(&weight_gradient(objective, vertices, a), &weight_gradient(objective, vertices, b)) / dw
            })
        })
        .fold(T::zero(), T::max);
    if est > T::zero() {
        est
    } else {
        T::one()
    }
}

/// Projected gradient descent on the weight simplex with step `1 / L_est`.
/// A step that would increase `f` doubles `L_est` instead, so the objective
/// never rises above the warm start.
fn correct_weights<T: Real, O: ConvexObjective<T> + ?Sized>(
    objective: &O,
    vertices: &[Vec<T>],
    w: &mut Vec<T>,
    inner_iters: usize,
    rng: &mut ChaCha8Rng,
) {
    if vertices.len() == 1 {
        return;
    }
    let mut l = lipschitz_estimate(objective, vertices, w, rng);
    let mut fw = objective.value(&combine(vertices, w));
    for _ in 0..inner_iters {
        let g = weight_gradient(objective, vertices, w);
        let moved: Vec<T> = w.iter().zip(&g).map(|(&x, &gi)| x - gi / l).collect();
        let cand = project_simplex(&moved);
        let fc = objective.value(&combine(vertices, &cand));
        if fc <= fw {
            *w = cand;
            fw = fc;
        } else {
            l *= T::lit(2.0);
        }
    }
}

/// Frank-Wolfe whose weights over all vertices found so far are re-optimized
/// after each oracle call (`inner_iters` projected-gradient steps, warm
/// started from the plain `2/(k+2)` step).
pub fn run_fully_corrective_fw<T: Real, O: ConvexObjective<T> + ?Sized>(
    mdp: &TabularMdp<T>,
    objective: &O,
    iterations: usize,
    inner_iters: usize,
    options: &GameOptions<T>,
) -> Result<GameTrace<T>, GameError> {
    let dim = checked_dim(mdp, objective, iterations)?;
    let mut d_bar = uniform_start(dim, objective.blocks().max(1));
    let mut vertices: Vec<Vec<T>> = Vec::new();
    // Iteration that introduced each vertex.
    let mut owner: Vec<usize> = Vec::new();
    let mut w: Vec<T> = Vec::new();
    let mut book = Book::new(mdp, objective, options, iterations, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0xfc_f0);
    for k in 0..iterations {
        let (lambda, d) = oracle(mdp, objective, &d_bar)?;
        let alpha: T = StepRule::Standard.alpha(k);
        for x in w.iter_mut() {
            *x *= T::one() - alpha;
        }
        match vertices.iter().position(|v| *v == d) {
            Some(i) => w[i] += alpha,
            None => {
                vertices.push(d.clone());
                owner.push(k);
                w.push(alpha);
            }
        }
        correct_weights(objective, &vertices, &mut w, inner_iters, &mut rng);
        d_bar = combine(&vertices, &w);
        log_step(&mut book, objective, lambda, d, &d_bar)?;
    }
    let mut weights = vec![T::zero(); iterations];
    for (&k, &x) in owner.iter().zip(&w) {
        weights[k] = x;
    }
    Ok(book.finish(d_bar, Some(weights), objective.grad_bound(), Vec::new(), 0))
}
