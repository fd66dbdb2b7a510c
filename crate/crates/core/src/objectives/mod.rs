//! Objectives `f` over occupancy measures.
//!
//! An objective is evaluated on a flat vector. Most objectives act on a single
//! occupancy of length `S * A`; skill objectives act on `Z` stacked
//! occupancies and report `blocks() == Z`.

mod skills;

pub use skills::{
    diayn_objective, SkillObjective, SkillSet, SkillVariant, MIXTURE_FLOOR,
};

use thiserror::Error;

use crate::mdp::{OccupancyMeasure, TabularMdp};
use crate::scalar::{dot, Real};

/// Floor applied inside logarithms at the boundary of the polytope.
pub const LOG_FLOOR: f64 = 1e-12;

/// Default uniform-mixing weight used to smooth an expert occupancy.
pub const EXPERT_SMOOTHING: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("expert occupancy has zero mass at entry {index}; smooth it before using KL")]
    ExpertSupportViolation { index: usize },
    #[error("skill mixture vanishes at visited state {state}")]
    ZeroMixtureState { state: usize },
    #[error("skill prior is not a probability vector")]
    InvalidPrior,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Feasible set of the cost player.
#[derive(Debug, Clone, PartialEq)]
pub enum DualSet<T> {
    /// `[-bound, bound]^n`.
    Box { bound: T },
    /// `{ l : ||l||_1 <= radius }`.
    L1Ball { radius: T },
    /// Probability simplex.
    Simplex,
    /// A single point; the cost player has nothing to choose.
    Point(Vec<T>),
}

/// Objective `f` over the occupancy polytope.
pub trait ConvexObjective<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, d: &[T]) -> T;

    /// `None` for objectives exposed only in bilinear game form.
    fn gradient(&self, d: &[T]) -> Option<Vec<T>>;

    /// Sup-norm bound on the gradients (or on the dual set) over `K`.
    fn grad_bound(&self) -> T;

    fn is_convex(&self) -> bool {
        true
    }

    /// Number of stacked occupancy blocks the objective acts on.
    fn blocks(&self) -> usize {
        1
    }

    /// Closed-form conjugate `f*(y)` when one exists. `+inf` outside its domain.
    fn conjugate(&self, _y: &[T]) -> Option<T> {
        None
    }

    /// `grad f*(y)` when the conjugate is differentiable in closed form.
    fn conjugate_gradient(&self, _y: &[T]) -> Option<Vec<T>> {
        None
    }

    /// `grad_y L(d, y) = d - grad f*(y)`: the cost player's ascent direction.
    /// Bilinear game-form objectives override this directly.
    fn dual_gradient(&self, d: &[T], y: &[T]) -> Option<Vec<T>> {
        let g = self.conjugate_gradient(y)?;
        Some(d.iter().zip(g).map(|(&di, gi)| di - gi).collect())
    }

    fn dual_set(&self) -> DualSet<T> {
        DualSet::Box { bound: self.grad_bound() }
    }
}

impl<T: Real, O: ConvexObjective<T> + ?Sized> ConvexObjective<T> for Box<O> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, d: &[T]) -> T {
        (**self).value(d)
    }
    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        (**self).gradient(d)
    }
    fn grad_bound(&self) -> T {
        (**self).grad_bound()
    }
    fn is_convex(&self) -> bool {
        (**self).is_convex()
    }
    fn blocks(&self) -> usize {
        (**self).blocks()
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        (**self).conjugate(y)
    }
    fn conjugate_gradient(&self, y: &[T]) -> Option<Vec<T>> {
        (**self).conjugate_gradient(y)
    }
    fn dual_gradient(&self, d: &[T], y: &[T]) -> Option<Vec<T>> {
        (**self).dual_gradient(d, y)
    }
    fn dual_set(&self) -> DualSet<T> {
        (**self).dual_set()
    }
}

fn xlogx<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

fn floored_ln<T: Real>(x: T) -> T {
    x.max(T::lit(LOG_FLOOR)).ln()
}

/// `f(d) = l0 . d`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    slope: Vec<T>,
}

pub fn linear_objective<T: Real>(slope: Vec<T>) -> Linear<T> {
    Linear { slope }
}

impl<T: Real> Linear<T> {
    pub fn slope(&self) -> &[T] {
        &self.slope
    }
}

impl<T: Real> ConvexObjective<T> for Linear<T> {
    fn name(&self) -> &str {
        "linear"
    }
    fn value(&self, d: &[T]) -> T {
        dot(&self.slope, d)
    }
    fn gradient(&self, _d: &[T]) -> Option<Vec<T>> {
        Some(self.slope.clone())
    }
    fn grad_bound(&self) -> T {
        let m = crate::scalar::max_abs(&self.slope);
        if m > T::zero() {
            m
        } else {
            T::one()
        }
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        let same = y.iter().zip(&self.slope).all(|(&a, &b)| (a - b).abs() <= T::tol(1e-12));
        Some(if same { T::zero() } else { T::infinity() })
    }
    fn dual_set(&self) -> DualSet<T> {
        DualSet::Point(self.slope.clone())
    }
}

/// `f(d) = sum d log d`, the negative Shannon entropy.
#[derive(Debug, Clone, Default)]
pub struct NegEntropy;

pub fn neg_entropy_objective() -> NegEntropy {
    NegEntropy
}

impl<T: Real> ConvexObjective<T> for NegEntropy {
    fn name(&self) -> &str {
        "neg_entropy"
    }
    fn value(&self, d: &[T]) -> T {
        d.iter().map(|&x| xlogx(x)).sum()
    }
    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        Some(d.iter().map(|&x| T::one() + floored_ln(x)).collect())
    }
    fn grad_bound(&self) -> T {
        // |1 + ln x| on [floor, 1] peaks at the floor.
        -(T::one() + T::lit(LOG_FLOOR).ln())
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        Some(y.iter().map(|&v| (v - T::one()).exp()).sum())
    }
    fn conjugate_gradient(&self, y: &[T]) -> Option<Vec<T>> {
        Some(y.iter().map(|&v| (v - T::one()).exp()).collect())
    }
}

/// Expert occupancy, either exact (a member of `K`) or an empirical estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertOccupancy<T> {
    pub values: Vec<T>,
    pub exact: bool,
}

impl<T: Real> ExpertOccupancy<T> {
    pub fn exact(d: &OccupancyMeasure<T>) -> Self {
        Self { values: d.values().to_vec(), exact: true }
    }

    pub fn empirical(values: Vec<T>) -> Self {
        Self { values, exact: false }
    }

    /// True when an exact expert passes the polytope check of `mdp`.
    pub fn is_consistent(&self, mdp: &TabularMdp<T>) -> bool {
        !self.exact
            || crate::mdp::validate_occupancy(mdp, &self.values).is_ok_and(|v| v.is_empty())
    }

    /// Mixes with the uniform vector: `(1 - eps) d_E + eps / n`.
    pub fn smoothed(&self, eps: T) -> Self {
        let u = T::one() / T::from_usize_lossy(self.values.len());
        Self {
            values: self.values.iter().map(|&x| (T::one() - eps) * x + eps * u).collect(),
            exact: false,
        }
    }
}

/// `f(d) = ||d - d_E||_2^2`.
#[derive(Debug, Clone)]
pub struct L2Apprenticeship<T> {
    expert: Vec<T>,
}

pub fn l2_apprenticeship_objective<T: Real>(expert: &ExpertOccupancy<T>) -> L2Apprenticeship<T> {
    L2Apprenticeship { expert: expert.values.clone() }
}

impl<T: Real> ConvexObjective<T> for L2Apprenticeship<T> {
    fn name(&self) -> &str {
        "l2_al"
    }
    fn value(&self, d: &[T]) -> T {
        d.iter().zip(&self.expert).map(|(&x, &e)| (x - e) * (x - e)).sum()
    }
    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        Some(d.iter().zip(&self.expert).map(|(&x, &e)| T::lit(2.0) * (x - e)).collect())
    }
    fn grad_bound(&self) -> T {
        // Both arguments lie in the simplex.
        T::lit(2.0)
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        Some(dot(y, &self.expert) + y.iter().map(|&v| v * v).sum::<T>() / T::lit(4.0))
    }
    fn conjugate_gradient(&self, y: &[T]) -> Option<Vec<T>> {
        Some(y.iter().zip(&self.expert).map(|(&v, &e)| e + v / T::lit(2.0)).collect())
    }
}

/// `f(d) = ||d - d_E||_inf`, played as `max_{||l||_1 <= 1} l . (d - d_E)`.
#[derive(Debug, Clone)]
pub struct LinfApprenticeship<T> {
    expert: Vec<T>,
}

pub fn linf_apprenticeship_game<T: Real>(expert: &ExpertOccupancy<T>) -> LinfApprenticeship<T> {
    LinfApprenticeship { expert: expert.values.clone() }
}

impl<T: Real> LinfApprenticeship<T> {
    /// Bilinear payoff `l . (d - d_E)`.
    pub fn payoff(&self, d: &[T], l: &[T]) -> T {
        d.iter().zip(&self.expert).zip(l).map(|((&x, &e), &li)| li * (x - e)).sum()
    }

    pub fn expert(&self) -> &[T] {
        &self.expert
    }
}

impl<T: Real> ConvexObjective<T> for LinfApprenticeship<T> {
    fn name(&self) -> &str {
        "linf_al"
    }
    fn value(&self, d: &[T]) -> T {
        d.iter().zip(&self.expert).fold(T::zero(), |m, (&x, &e)| m.max((x - e).abs()))
    }
    fn gradient(&self, _d: &[T]) -> Option<Vec<T>> {
        None
    }
    fn grad_bound(&self) -> T {
        T::one()
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        let l1: T = y.iter().map(|v| v.abs()).sum();
        Some(if l1 <= T::one() + T::tol(1e-12) { dot(y, &self.expert) } else { T::infinity() })
    }
    fn dual_gradient(&self, d: &[T], _y: &[T]) -> Option<Vec<T>> {
        Some(d.iter().zip(&self.expert).map(|(&x, &e)| x - e).collect())
    }
    fn dual_set(&self) -> DualSet<T> {
        DualSet::L1Ball { radius: T::one() }
    }
}

/// `f(d) = sum d log(d / d_E)`.
#[derive(Debug, Clone)]
pub struct KlDivergence<T> {
    expert: Vec<T>,
    bound: T,
}

/// Requires a strictly positive expert; see [`ExpertOccupancy::smoothed`].
pub fn kl_objective<T: Real>(
    expert: &ExpertOccupancy<T>,
) -> Result<KlDivergence<T>, ObjectiveError> {
    if let Some(index) = expert.values.iter().position(|&e| e.is_nan() || e <= T::zero()) {
        return Err(ObjectiveError::ExpertSupportViolation { index });
    }
    let ln_floor = T::lit(LOG_FLOOR).ln();
    let bound = expert.values.iter().fold(T::zero(), |m, &e| {
        let le = e.ln();
        m.max((T::one() + ln_floor - le).abs()).max((T::one() - le).abs())
    });
    Ok(KlDivergence { expert: expert.values.clone(), bound })
}

impl<T: Real> ConvexObjective<T> for KlDivergence<T> {
    fn name(&self) -> &str {
        "kl"
    }
    fn value(&self, d: &[T]) -> T {
        d.iter()
            .zip(&self.expert)
            .map(|(&x, &e)| if x > T::zero() { x * (x / e).ln() } else { T::zero() })
            .sum()
    }
    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        Some(d.iter().zip(&self.expert).map(|(&x, &e)| T::one() + floored_ln(x) - e.ln()).collect())
    }
    fn grad_bound(&self) -> T {
        self.bound
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        Some(y.iter().zip(&self.expert).map(|(&v, &e)| e * (v - T::one()).exp()).sum())
    }
    fn conjugate_gradient(&self, y: &[T]) -> Option<Vec<T>> {
        Some(y.iter().zip(&self.expert).map(|(&v, &e)| e * (v - T::one()).exp()).collect())
    }
}

/// Nonnegative combination `sum_i w_i f_i`.
pub struct WeightedSum<T> {
    terms: Vec<(T, Box<dyn ConvexObjective<T>>)>,
}

pub fn weighted_sum<T: Real>(terms: Vec<(T, Box<dyn ConvexObjective<T>>)>) -> WeightedSum<T> {
    assert!(terms.iter().all(|(w, _)| *w >= T::zero()), "weights must be nonnegative");
    WeightedSum { terms }
}

impl<T: Real> ConvexObjective<T> for WeightedSum<T> {
    fn name(&self) -> &str {
        "weighted_sum"
    }
    fn value(&self, d: &[T]) -> T {
        self.terms.iter().map(|(w, f)| *w * f.value(d)).sum()
    }
    fn gradient(&self, d: &[T]) -> Option<Vec<T>> {
        let mut acc = vec![T::zero(); d.len()];
        for (w, f) in &self.terms {
            for (a, g) in acc.iter_mut().zip(f.gradient(d)?) {
                *a += *w * g;
            }
        }
        Some(acc)
    }
    fn grad_bound(&self) -> T {
        self.terms.iter().map(|(w, f)| *w * f.grad_bound()).sum()
    }
    fn is_convex(&self) -> bool {
        self.terms.iter().all(|(_, f)| f.is_convex())
    }
    fn conjugate(&self, y: &[T]) -> Option<T> {
        // (w f)*(y) = w f*(y / w); sums only have a closed form with one term.
        match self.terms.as_slice() {
            [(w, f)] if *w > T::zero() => {
                let scaled: Vec<T> = y.iter().map(|&v| v / *w).collect();
                f.conjugate(&scaled).map(|c| *w * c)
            }
            _ => None,
        }
    }
    fn conjugate_gradient(&self, y: &[T]) -> Option<Vec<T>> {
        match self.terms.as_slice() {
            [(w, f)] if *w > T::zero() => {
                let scaled: Vec<T> = y.iter().map(|&v| v / *w).collect();
                f.conjugate_gradient(&scaled)
            }
            _ => None,
        }
    }
}

/// `max_{d in grid} (y . d - f(d))`, a lower bound on `f*(y)`.
pub fn fenchel_conjugate_check<T: Real, O: ConvexObjective<T> + ?Sized>(
    objective: &O,
    y: &[T],
    grid: &[Vec<T>],
) -> T {
    grid.iter()
        .map(|d| dot(y, d) - objective.value(d))
        .fold(T::neg_infinity(), |m, v| m.max(v))
}

/// Largest relative deviation between `gradient(d)` and central differences
/// with step `h`, normalized by `max(1, |g_i|)`.
pub fn gradient_check<T: Real, O: ConvexObjective<T> + ?Sized>(
    objective: &O,
    d: &[T],
    h: T,
) -> Option<f64> {
    let g = objective.gradient(d)?;
    let mut worst = 0.0_f64;
    let mut probe = d.to_vec();
    for i in 0..d.len() {
        probe[i] = d[i] + h;
        let up = objective.value(&probe);
        probe[i] = d[i] - h;
        let down = objective.value(&probe);
        probe[i] = d[i];
        let fd = (up - down) / (h + h);
        let err = ((fd - g[i]).abs() / g[i].abs().max(T::one())).to_f64_lossy();
        worst = worst.max(err);
    }
    Some(worst)
}
