//! Tabular MDPs, stationary policies and their occupancy measures.
//!
//! Transition kernels are stored densely, row-major over `(s, a, s')`, with
//! a cached sparse successor list per `(s, a)` for sampling and backups.

mod envs;
mod occupancy;

pub use envs::{
    make_deep_sea, make_gridworld, make_random_mdp, make_two_state_symmetric, DeepSea, EnvSpec,
    ModeSpec, GRID_EAST, GRID_NORTH, GRID_SOUTH, GRID_WEST,
};
pub use occupancy::{
    occupancy_of_policy, policy_of_occupancy, recurrent_classes, validate_occupancy,
    OccupancyMeasure, Violation, ZERO_MARGINAL,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("MDP needs at least one state and one action (got S={states}, A={actions})")]
    EmptySpace { states: usize, actions: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transition row (s={state}, a={action}) is not a probability vector (sum {sum})")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },
    #[error("initial distribution is not a probability vector (sum {sum})")]
    InitialNotNormalized { sum: f64 },
    #[error("discount must lie in (0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("policy row {state} is not a probability vector")]
    InvalidPolicyRow { state: usize },
    #[error("average-mode occupancy undefined: induced chain has {classes} recurrent classes")]
    AverageModeNotUnichain { classes: usize },
    #[error("flow system is singular")]
    SingularSystem,
    #[error("invalid environment parameter: {0}")]
    InvalidParameter(String),
}

/// Performance criterion of the MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode<T> {
    Average,
    Discounted { gamma: T },
}

impl<T: Real> Mode<T> {
    pub fn tag(&self) -> ModeTag {
        match self {
            Mode::Average => ModeTag::Average,
            Mode::Discounted { .. } => ModeTag::Discounted,
        }
    }

    pub fn gamma(&self) -> Option<T> {
        match *self {
            Mode::Average => None,
            Mode::Discounted { gamma } => Some(gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    #[default]
    Average,
    Discounted,
}

/// Finite MDP `(S, A, P, d0)` with an average or discounted criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    num_states: usize,
    num_actions: usize,
    transition: Vec<T>,
    initial: Vec<T>,
    mode: Mode<T>,
    successors: Vec<Vec<(usize, T)>>,
}

fn check_distribution<T: Real>(row: &[T]) -> Result<(), f64> {
    let sum: T = row.iter().copied().sum();
    let ok = row.iter().all(|&p| p >= T::zero() && p.is_finite())
        && (sum - T::one()).abs() <= T::tol(1e-9);
    if ok {
        Ok(())
    } else {
        Err(sum.to_f64_lossy())
    }
}

impl<T: Real> TabularMdp<T> {
    /// Builds and validates an MDP. `transition` is row-major `(s, a, s')`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<T>,
        initial: Vec<T>,
        mode: Mode<T>,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::EmptySpace { states: num_states, actions: num_actions });
        }
        let expected = num_states * num_actions * num_states;
        if transition.len() != expected {
            return Err(MdpError::DimensionMismatch { expected, got: transition.len() });
        }
        if initial.len() != num_states {
            return Err(MdpError::DimensionMismatch { expected: num_states, got: initial.len() });
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = &transition[(s * num_actions + a) * num_states..][..num_states];
                check_distribution(row)
                    .map_err(|sum| MdpError::RowNotStochastic { state: s, action: a, sum })?;
            }
        }
        check_distribution(&initial).map_err(|sum| MdpError::InitialNotNormalized { sum })?;
        if let Mode::Discounted { gamma } = mode {
            if !(gamma > T::zero() && gamma < T::one()) {
                return Err(MdpError::InvalidDiscount(gamma.to_f64_lossy()));
            }
        }
        let successors = transition
            .chunks(num_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > T::zero())
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect();
        Ok(Self { num_states, num_actions, transition, initial, mode, successors })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs, the dimension of occupancy vectors.
    pub fn dim(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn mode(&self) -> Mode<T> {
        self.mode
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn transition(&self) -> &[T] {
        &self.transition
    }

    /// `P(. | s, a)` as a dense row.
    pub fn row(&self, s: usize, a: usize) -> &[T] {
        &self.transition[(s * self.num_actions + a) * self.num_states..][..self.num_states]
    }

    /// Nonzero entries of `P(. | s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, T)] {
        &self.successors[s * self.num_actions + a]
    }

    /// `sum_{s'} P(s' | s, a) v(s')`.
    pub fn expect(&self, s: usize, a: usize, v: &[T]) -> T {
        self.successors(s, a).iter().map(|&(j, p)| p * v[j]).sum()
    }

    /// Same MDP with a different criterion.
    pub fn with_mode(&self, mode: Mode<T>) -> Result<Self, MdpError> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            self.initial.clone(),
            mode,
        )
    }

    /// Same dynamics with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<T>) -> Result<Self, MdpError> {
        Self::new(self.num_states, self.num_actions, self.transition.clone(), initial, self.mode)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_sparse(self.successors(s, a), rng)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_dense(&self.initial, rng)
    }

    /// State-to-state kernel of the chain induced by `policy`, row-major `S x S`.
    pub fn induced_chain(&self, policy: &Policy<T>) -> Vec<T> {
        let n = self.num_states;
        let mut chain = vec![T::zero(); n * n];
        for s in 0..n {
            for a in 0..self.num_actions {
                let pa = policy.prob(s, a);
                if pa == T::zero() {
                    continue;
                }
                for &(j, p) in self.successors(s, a) {
                    chain[s * n + j] += pa * p;
                }
            }
        }
        chain
    }

    pub(crate) fn check_policy(&self, policy: &Policy<T>) -> Result<(), MdpError> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(MdpError::DimensionMismatch {
                expected: self.dim(),
                got: policy.num_states() * policy.num_actions(),
            });
        }
        Ok(())
    }
}

pub(crate) fn sample_dense<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > T::zero() {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn sample_sparse<T: Real, R: Rng + ?Sized>(entries: &[(usize, T)], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for &(j, p) in entries {
        acc += p;
        if u < acc {
            return j;
        }
    }
    entries.last().map(|&(j, _)| j).unwrap_or(0)
}

/// Stationary (possibly randomized) policy, row-major `S x A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    num_states: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Real> Policy<T> {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<T>) -> Result<Self, MdpError> {
        if probs.len() != num_states * num_actions {
            return Err(MdpError::DimensionMismatch {
                expected: num_states * num_actions,
                got: probs.len(),
            });
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            check_distribution(row).map_err(|_| MdpError::InvalidPolicyRow { state: s })?;
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(num_actions);
        Self { num_states, num_actions, probs: vec![p; num_states * num_actions] }
    }

    /// Rows drawn independently from the flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(num_states * num_actions);
        for _ in 0..num_states {
            let w: Vec<f64> = (0..num_actions).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = w.iter().sum();
            probs.extend(w.iter().map(|&x| T::lit(x / total)));
        }
        Self { num_states, num_actions, probs }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![T::zero(); actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            assert!(a < num_actions, "action {a} out of range");
            probs[s * num_actions + a] = T::one();
        }
        Self { num_states: actions.len(), num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.num_actions..][..self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[s * self.num_actions + a]
    }

    /// Chosen action per state if every row is one-hot.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.num_states)
            .map(|s| {
                let row = self.row(s);
                let hot = row.iter().position(|&p| p == T::one())?;
                row.iter().enumerate().all(|(a, &p)| a == hot || p == T::zero()).then_some(hot)
            })
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.as_deterministic().is_some()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_dense(self.row(s), rng)
    }

    /// Every deterministic policy of an `S x A` space, in lexicographic order.
    pub fn enumerate_deterministic(num_states: usize, num_actions: usize) -> DeterministicPolicies {
        DeterministicPolicies { num_actions, next: Some(vec![0; num_states]) }
    }
}

/// Iterator over all `A^S` deterministic action assignments.
pub struct DeterministicPolicies {
    num_actions: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for DeterministicPolicies {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for digit in succ.iter_mut() {
            *digit += 1;
            if *digit < self.num_actions {
                self.next = Some(succ);
                return Some(current);
            }
            *digit = 0;
        }
        Some(current)
    }
}
