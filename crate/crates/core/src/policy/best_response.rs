//! Exact best response by value iteration (discounted) or relative value
//! iteration (average reward).

use super::{greedy_action, PolicyError, ValueFunction, APERIODICITY_TAU, MAX_SWEEPS};
use crate::mdp::{occupancy_of_policy, Mode, OccupancyMeasure, Policy, TabularMdp};
use crate::scalar::{max_abs, span, Real};

/// Result of a best-response computation.
#[derive(Debug, Clone)]
pub struct BestResponse<T> {
    pub policy: Policy<T>,
    pub occupancy: OccupancyMeasure<T>,
    pub value: ValueFunction<T>,
}

impl<T: Real> BestResponse<T> {
    /// `J = r . d` of the returned policy.
    pub fn achieved(&self, reward: &[T]) -> T {
        self.occupancy.dot(reward)
    }
}

/// Deterministic policy maximizing `r . d` over the occupancy polytope to
/// within `tol`. Ties go to the lowest action index.
pub fn best_response<T: Real>(
    mdp: &TabularMdp<T>,
    reward: &[T],
    tol: T,
) -> Result<BestResponse<T>, PolicyError> {
    if reward.len() != mdp.dim() {
        return Err(PolicyError::DimensionMismatch { expected: mdp.dim(), got: reward.len() });
    }
    let (actions, value) = match mdp.mode() {
        Mode::Discounted { gamma } => value_iteration(mdp, reward, gamma, tol)?,
        Mode::Average => relative_value_iteration(mdp, reward, tol)?,
    };
    let policy = Policy::deterministic(mdp.num_actions(), &actions);
    let occupancy = occupancy_of_policy(mdp, &policy)?;
    Ok(BestResponse { policy, occupancy, value })
}

/// One Bellman backup of `v` under kernel `(1 - tau) P + tau I` (tau = 0 for
/// the discounted case) with discount `gamma`. Returns the backed-up values
/// and the greedy actions.
fn backup<T: Real>(
    mdp: &TabularMdp<T>,
    reward: &[T],
    v: &[T],
    gamma: T,
    tau: T,
    out: &mut [T],
    actions: &mut [usize],
) {
    let na = mdp.num_actions();
    let mut q = vec![T::zero(); na];
    for s in 0..mdp.num_states() {
        for (a, qa) in q.iter_mut().enumerate() {
            let next = tau * v[s] + (T::one() - tau) * mdp.expect(s, a, v);
            *qa = reward[s * na + a] + gamma * next;
        }
        let a = greedy_action(&q);
        actions[s] = a;
        out[s] = q[a];
    }
}

fn value_iteration<T: Real>(
    mdp: &TabularMdp<T>,
    reward: &[T],
    gamma: T,
    tol: T,
) -> Result<(Vec<usize>, ValueFunction<T>), PolicyError> {
    let n = mdp.num_states();
    let threshold = tol * (T::one() - gamma) / (T::lit(2.0) * gamma);
    let mut v = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut actions = vec![0; n];
    for sweep in 1..=MAX_SWEEPS {
        backup(mdp, reward, &v, gamma, T::zero(), &mut next, &mut actions);
        let residual = max_abs(&next.iter().zip(&v).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        std::mem::swap(&mut v, &mut next);
        if residual <= threshold {
            // Greedy with respect to the latest iterate.
            backup(mdp, reward, &v, gamma, T::zero(), &mut next, &mut actions);
            return Ok((actions, ValueFunction { v, gain: None, residual, iterations: sweep }));
        }
    }
    Err(PolicyError::NotConverged { iterations: MAX_SWEEPS })
}

fn relative_value_iteration<T: Real>(
    mdp: &TabularMdp<T>,
    reward: &[T],
    tol: T,
) -> Result<(Vec<usize>, ValueFunction<T>), PolicyError> {
    let n = mdp.num_states();
    let tau = T::lit(APERIODICITY_TAU);
    let mut w = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut actions = vec![0; n];
    for sweep in 1..=MAX_SWEEPS {
        backup(mdp, reward, &w, T::one(), tau, &mut next, &mut actions);
        let diff: Vec<T> = next.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let residual = span(&diff);
        if residual <= tol {
            // `actions` is greedy for `w`, so its gain lies within the span.
            let (lo, hi) = diff.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &x| {
                (l.min(x), h.max(x))
            });
            let gain = (lo + hi) / T::lit(2.0);
            return Ok((actions, ValueFunction { v: w, gain: Some(gain), residual, iterations: sweep }));
        }
        let anchor = next[0];
        for (wi, &x) in w.iter_mut().zip(&next) {
            *wi = x - anchor;
        }
    }
    Err(PolicyError::NotConverged { iterations: MAX_SWEEPS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_gridworld, make_random_mdp, Policy};

    #[test]
    fn zero_reward_picks_lowest_actions() {
        let mdp = make_random_mdp::<f64>(5, 3, 2, 1, Mode::Discounted { gamma: 0.9 }).unwrap();
        let br = best_response(&mdp, &[0.0; 15], 1e-9).unwrap();
        assert_eq!(br.policy.as_deterministic().unwrap(), vec![0; 5]);
        assert_eq!(br.achieved(&[0.0; 15]), 0.0);
        let avg = mdp.with_mode(Mode::Average).unwrap();
        let br = best_response(&avg, &[0.0; 15], 1e-9).unwrap();
        assert_eq!(br.policy.as_deterministic().unwrap(), vec![0; 5]);
    }

    #[test]
    fn single_state_bandit() {
        let mdp =
            TabularMdp::<f64>::new(1, 2, vec![1.0, 1.0], vec![1.0], Mode::Discounted { gamma: 0.9 }).unwrap();
        let br = best_response(&mdp, &[1.0, 0.0], 1e-9).unwrap();
        assert_eq!(br.occupancy.values(), &[1.0, 0.0]);
        assert!((br.achieved(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    fn brute_force(mdp: &TabularMdp<f64>, r: &[f64]) -> f64 {
        Policy::<f64>::enumerate_deterministic(mdp.num_states(), mdp.num_actions())
            .map(|a| {
                occupancy_of_policy(mdp, &Policy::deterministic(mdp.num_actions(), &a))
                    .unwrap()
                    .dot(r)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn matches_enumeration_on_random_mdps() {
        for seed in 0..10 {
            for mode in [Mode::Discounted { gamma: 0.95 }, Mode::Average] {
                let mdp = make_random_mdp::<f64>(4, 3, 4, seed, mode).unwrap();
                let r: Vec<f64> = (0..12).map(|i| ((i * 7 + seed as usize) % 11) as f64 / 10.0 - 0.5).collect();
                let br = best_response(&mdp, &r, 1e-9).unwrap();
                assert!(br.policy.is_deterministic());
                let best = brute_force(&mdp, &r);
                assert!((br.achieved(&r) - best).abs() <= 1e-9, "seed {seed}: {} vs {best}", br.achieved(&r));
            }
        }
    }

    #[test]
    fn average_gain_is_reported() {
        let mdp = make_gridworld::<f64>(3, 3, 0.1, Mode::Average).unwrap();
        let mut r = vec![0.0; 36];
        r[8 * 4] = 1.0;
        let br = best_response(&mdp, &r, 1e-10).unwrap();
        assert!((br.value.gain.unwrap() - br.achieved(&r)).abs() < 1e-9);
    }
}
