//! Tabular Q-learning as a PAC approximate best response.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{greedy_action, PolicyError};
use crate::mdp::{occupancy_of_policy, OccupancyMeasure, Policy, TabularMdp};
use crate::scalar::Real;

/// Sample access to an environment.
pub trait Simulator<T> {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize;
    fn step<R: Rng + ?Sized>(&mut self, state: usize, action: usize, rng: &mut R) -> usize;
}

/// Simulator backed by a known MDP; learners only see sampled transitions.
pub struct MdpSimulator<'a, T> {
    mdp: &'a TabularMdp<T>,
}

impl<'a, T: Real> MdpSimulator<'a, T> {
    pub fn new(mdp: &'a TabularMdp<T>) -> Self {
        Self { mdp }
    }
}

impl<T: Real> Simulator<T> for MdpSimulator<'_, T> {
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }
    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        self.mdp.sample_initial(rng)
    }
    fn step<R: Rng + ?Sized>(&mut self, state: usize, action: usize, rng: &mut R) -> usize {
        self.mdp.sample_next(state, action, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QLearningConfig {
    /// Learning rate `1 / N(s, a)^rate_exponent`.
    pub rate_exponent: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self { rate_exponent: 0.7 }
    }
}

#[derive(Debug, Clone)]
pub struct QLearningResult<T> {
    pub policy: Policy<T>,
    pub occupancy: OccupancyMeasure<T>,
    pub q: Vec<T>,
    pub samples: usize,
    /// Set when the greedy policy still changed during the last tenth of the budget.
    pub budget_too_small: bool,
}

/// Runs `budget` steps of epsilon-greedy Q-learning (epsilon = 1/sqrt(t)) on
/// reward `r` and returns the greedy policy with its exact occupancy.
///
/// Discounted mode learns the discounted values and restarts from the
/// initial distribution with probability `1 - gamma` per step. Average mode
/// uses relative Q-learning anchored at state 0.
pub fn q_learning_best_response<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    reward: &[T],
    budget: usize,
    config: QLearningConfig,
    rng: &mut R,
) -> Result<QLearningResult<T>, PolicyError> {
    if budget == 0 {
        return Err(PolicyError::InvalidBudget);
    }
    if reward.len() != mdp.dim() {
        return Err(PolicyError::DimensionMismatch { expected: mdp.dim(), got: reward.len() });
    }
    let mut sim = MdpSimulator::new(mdp);
    let (ns, na) = (sim.num_states(), sim.num_actions());
    let gamma = mdp.mode().gamma();
    let mut q = vec![T::zero(); ns * na];
    let mut visits = vec![0_u64; ns * na];
    let mut greedy = vec![0_usize; ns];
    let late = budget - budget / 10;
    let mut changed_late = false;
    let mut s = sim.reset(rng);
    for t in 1..=budget {
        let eps = 1.0 / (t as f64).sqrt();
        let a = if rng.random::<f64>() < eps { rng.random_range(0..na) } else { greedy[s] };
        let next = sim.step(s, a, rng);
        let idx = s * na + a;
        visits[idx] += 1;
        let eta = T::lit((visits[idx] as f64).powf(-config.rate_exponent));
        let best_next = q[next * na + greedy[next]];
        let target = match gamma {
            Some(g) => reward[idx] + g * best_next,
            None => reward[idx] + best_next - q[greedy[0]],
        };
        let old = q[idx];
        q[idx] = old + eta * (target - old);
        let g = greedy_action(&q[s * na..(s + 1) * na]);
        if g != greedy[s] {
            greedy[s] = g;
            changed_late |= t > late;
        }
        s = match gamma {
            Some(g) if rng.random::<f64>() >= g.to_f64_lossy() => sim.reset(rng),
            _ => next,
        };
    }
    let policy = Policy::deterministic(na, &greedy);
    let occupancy = occupancy_of_policy(mdp, &policy)?;
    Ok(QLearningResult { policy, occupancy, q, samples: budget, budget_too_small: changed_late })
}
