//! Policy players: given a cost `lambda`, return an occupancy that (nearly)
//! maximizes the reward `-lambda`.

mod best_response;
mod qlearning;
mod ucrl2;

pub use best_response::{best_response, BestResponse};
pub use qlearning::{
    q_learning_best_response, MdpSimulator, QLearningConfig, QLearningResult, Simulator,
};
pub use ucrl2::{
    extended_value_iteration, optimistic_transition, ConfidenceSet, EviBudget, EviResult,
    Transition, Ucrl2Player, CONFIDENCE_CONSTANT,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{occupancy_of_policy, MdpError, Mode, OccupancyMeasure, Policy, TabularMdp};
use crate::scalar::Real;

/// Self-loop weight of the aperiodicity transform `tau I + (1 - tau) P`.
/// The transform leaves gains and optimal policies unchanged.
pub const APERIODICITY_TAU: f64 = 0.5;

/// Tolerance of the exact best-response player and of regret oracles.
pub const EXACT_TOL: f64 = 1e-10;

/// Sweep cap for value iteration.
pub const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value iteration did not converge in {iterations} sweeps")]
    NotConverged { iterations: usize },
    #[error("sample budget must be at least one step")]
    InvalidBudget,
    #[error("UCRL2 requires the average-reward criterion")]
    Ucrl2NeedsAverageMode,
}

/// Values after the last sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<T> {
    pub v: Vec<T>,
    /// Average reward estimate (average mode only).
    pub gain: Option<T>,
    /// Sup-norm residual (discounted) or increment span (average) at stopping.
    pub residual: T,
    pub iterations: usize,
}

/// Index of the maximal entry; lowest index among near-ties.
pub(crate) fn greedy_action<T: Real>(q: &[T]) -> usize {
    let tie = T::tol(1e-12);
    let mut best = 0;
    for a in 1..q.len() {
        if q[a] > q[best] + tie * (T::one() + q[best].abs()) {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToleranceSchedule {
    #[serde(rename = "const")]
    Constant,
    #[serde(rename = "1/k")]
    InvK,
    #[serde(rename = "1/sqrt(k)")]
    InvSqrtK,
}

impl ToleranceSchedule {
    /// `eps_k = c * s(k)`.
    pub fn at<T: Real>(self, c: T, k: usize) -> T {
        let kk = T::from_usize_lossy(k.max(1));
        match self {
            ToleranceSchedule::Constant => c,
            ToleranceSchedule::InvK => c / kk,
            ToleranceSchedule::InvSqrtK => c / kk.sqrt(),
        }
    }
}

/// Policy player configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyPlayerConfig<T> {
    BestResponse { schedule: ToleranceSchedule, tol_c: T },
    /// Budget at iteration `k` is `q_budget * (tol_c / eps_k)^2`, the PAC
    /// sample scaling for accuracy `eps_k`.
    QLearning { schedule: ToleranceSchedule, tol_c: T, q_budget: usize, config: QLearningConfig },
    Ucrl2 { delta: T, evi_budget: EviBudget, horizon: usize },
}

impl<T: Real> PolicyPlayerConfig<T> {
    pub fn exact() -> Self {
        PolicyPlayerConfig::BestResponse { schedule: ToleranceSchedule::Constant, tol_c: T::tol(EXACT_TOL) }
    }

    pub fn is_exact_best_response(&self) -> bool {
        matches!(self, PolicyPlayerConfig::BestResponse { .. })
    }
}

/// Answer of a policy player at one iteration.
#[derive(Debug, Clone)]
pub struct PolicyResponse<T> {
    pub policy: Policy<T>,
    pub occupancy: OccupancyMeasure<T>,
    /// Environment steps consumed.
    pub samples: usize,
    pub budget_too_small: bool,
    pub transition: Option<Transition>,
}

/// Single-owner runtime state of one policy player.
#[derive(Debug, Clone)]
pub struct PolicyPlayer<T> {
    config: PolicyPlayerConfig<T>,
    rng: ChaCha8Rng,
    ucrl2: Option<Ucrl2Player<T>>,
    step: usize,
}

impl<T: Real> PolicyPlayer<T> {
    pub fn new(config: PolicyPlayerConfig<T>, mdp: &TabularMdp<T>, seed: u64) -> Result<Self, PolicyError> {
        let ucrl2 = match &config {
            PolicyPlayerConfig::Ucrl2 { delta, horizon, .. } => {
                if mdp.mode() != Mode::Average {
                    return Err(PolicyError::Ucrl2NeedsAverageMode);
                }
                Some(Ucrl2Player::new(mdp.num_states(), mdp.num_actions(), *horizon, *delta))
            }
            _ => None,
        };
        Ok(Self { config, rng: ChaCha8Rng::seed_from_u64(seed), ucrl2, step: 0 })
    }

    pub fn config(&self) -> &PolicyPlayerConfig<T> {
        &self.config
    }

    /// Responds to `reward` (already normalized to `[-1, 1]`) at the next iteration.
    pub fn respond(&mut self, mdp: &TabularMdp<T>, reward: &[T]) -> Result<PolicyResponse<T>, PolicyError> {
        self.step += 1;
        let k = self.step;
        match &self.config {
            PolicyPlayerConfig::BestResponse { schedule, tol_c } => {
                let br = best_response(mdp, reward, schedule.at(*tol_c, k))?;
                Ok(PolicyResponse {
                    policy: br.policy,
                    occupancy: br.occupancy,
                    samples: 0,
                    budget_too_small: false,
                    transition: None,
                })
            }
            PolicyPlayerConfig::QLearning { schedule, tol_c, q_budget, config } => {
                let ratio = (*tol_c / schedule.at(*tol_c, k)).to_f64_lossy();
                let budget = ((*q_budget as f64) * ratio * ratio).round().max(1.0) as usize;
                let res = q_learning_best_response(mdp, reward, budget, *config, &mut self.rng)?;
                Ok(PolicyResponse {
                    policy: res.policy,
                    occupancy: res.occupancy,
                    samples: res.samples,
                    budget_too_small: res.budget_too_small,
                    transition: None,
                })
            }
            PolicyPlayerConfig::Ucrl2 { evi_budget, .. } => {
                let player = self.ucrl2.as_mut().expect("constructed with UCRL2 state");
                let (evi, transition) = player.step(mdp, reward, evi_budget.at(k), &mut self.rng)?;
                let occupancy = occupancy_of_policy(mdp, &evi.policy)?;
                Ok(PolicyResponse {
                    policy: evi.policy,
                    occupancy,
                    samples: 1,
                    budget_too_small: false,
                    transition: Some(transition),
                })
            }
        }
    }
}

/// `(1/K) sum_k (J*_k - J_k)` for rewards `r_k` and achieved values `J_k`,
/// with `J*_k` from an exact best response.
pub fn policy_player_regret<T: Real>(
    mdp: &TabularMdp<T>,
    rewards: &[Vec<T>],
    achieved: &[T],
) -> Result<T, PolicyError> {
    assert_eq!(rewards.len(), achieved.len());
    if rewards.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (r, &j) in rewards.iter().zip(achieved) {
        let best = best_response(mdp, r, T::tol(EXACT_TOL))?.achieved(r);
        total += best - j;
    }
    Ok(total / T::from_usize_lossy(rewards.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::make_random_mdp;

    #[test]
    fn greedy_prefers_lowest_index() {
        assert_eq!(greedy_action(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(greedy_action(&[0.0, 1.0, 1.0]), 1);
        assert_eq!(greedy_action(&[0.0, 0.0, 1e-3]), 2);
    }

    #[test]
    fn schedules_are_nonincreasing() {
        for s in [ToleranceSchedule::Constant, ToleranceSchedule::InvK, ToleranceSchedule::InvSqrtK] {
            let mut last = f64::INFINITY;
            for k in 1..100 {
                let e = s.at(0.5, k);
                assert!(e > 0.0 && e <= last);
                last = e;
            }
        }
        assert_eq!(ToleranceSchedule::InvSqrtK.at(1.0, 4), 0.5);
    }

    #[test]
    fn exact_player_has_negligible_regret() {
        let mdp = make_random_mdp::<f64>(4, 2, 3, 7, Mode::Discounted { gamma: 0.9 }).unwrap();
        let cfg = PolicyPlayerConfig::BestResponse { schedule: ToleranceSchedule::Constant, tol_c: 1e-9 };
        let mut player = PolicyPlayer::new(cfg, &mdp, 0).unwrap();
        let mut rewards = Vec::new();
        let mut achieved = Vec::new();
        for k in 0..20 {
            let r: Vec<f64> = (0..8).map(|i| (((i + 3 * k) % 5) as f64 / 4.0) * 2.0 - 1.0).collect();
            let resp = player.respond(&mdp, &r).unwrap();
            achieved.push(resp.occupancy.dot(&r));
            rewards.push(r);
        }
        assert!(policy_player_regret(&mdp, &rewards, &achieved).unwrap() <= 1e-8);
    }

    #[test]
    fn scaling_cost_keeps_best_response() {
        for seed in 0..10 {
            let mdp = make_random_mdp::<f64>(5, 3, 3, seed, Mode::Discounted { gamma: 0.9 }).unwrap();
            let r: Vec<f64> = (0..15).map(|i| ((i * 17 + seed as usize * 5) % 13) as f64 / 13.0).collect();
            let base = best_response(&mdp, &r, 1e-10).unwrap().policy;
            for s in [0.01, 3.0, 250.0] {
                let scaled: Vec<f64> = r.iter().map(|x| x * s).collect();
                assert_eq!(best_response(&mdp, &scaled, 1e-10 * s).unwrap().policy, base);
            }
        }
    }

    #[test]
    fn ucrl2_rejects_discounted() {
        let mdp = make_random_mdp::<f64>(3, 2, 2, 0, Mode::Discounted { gamma: 0.9 }).unwrap();
        let cfg = PolicyPlayerConfig::Ucrl2 { delta: 0.1, evi_budget: EviBudget::Iteration, horizon: 10 };
        assert!(matches!(PolicyPlayer::new(cfg, &mdp, 0), Err(PolicyError::Ucrl2NeedsAverageMode)));
    }
}
