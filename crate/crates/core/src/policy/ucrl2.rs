//! Optimistic exploration: L1 confidence sets over transitions, extended
//! value iteration, and a UCRL2 player acting one step per game iteration.

use rand::Rng;

use super::{greedy_action, PolicyError, ValueFunction, APERIODICITY_TAU};
use crate::mdp::{Policy, TabularMdp};
use crate::scalar::{span, Real};

/// Constant in the L1 radius `sqrt(c * S * log(K / delta) / max(1, N))`.
pub const CONFIDENCE_CONSTANT: f64 = 14.0;

/// Empirical transition model with per-pair L1 confidence radii.
#[derive(Debug, Clone)]
pub struct ConfidenceSet<T> {
    num_states: usize,
    num_actions: usize,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    log_term: T,
    /// Radius override, used to pin every radius in tests.
    fixed_radius: Option<T>,
}

impl<T: Real> ConfidenceSet<T> {
    /// `horizon` is the number of game iterations `K`, `delta` the confidence level.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, delta: T) -> Self {
        let log_term = (T::from_usize_lossy(horizon.max(2)) / delta).ln().max(T::zero());
        Self {
            num_states,
            num_actions,
            visits: vec![0; num_states * num_actions],
            transitions: vec![0; num_states * num_actions * num_states],
            log_term,
            fixed_radius: None,
        }
    }

    /// Confidence set with empirical model `p_hat` (treated as fully observed)
    /// and every radius equal to `radius`.
    pub fn with_model(mdp: &TabularMdp<T>, radius: T) -> (Self, Vec<T>) {
        let mut set = Self::new(mdp.num_states(), mdp.num_actions(), 2, T::one());
        set.fixed_radius = Some(radius);
        (set, mdp.transition().to_vec())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.num_actions + a]
    }

    pub fn record(&mut self, s: usize, a: usize, next: usize) {
        let idx = s * self.num_actions + a;
        self.visits[idx] += 1;
        self.transitions[idx * self.num_states + next] += 1;
    }

    pub fn radius(&self, s: usize, a: usize) -> T {
        if let Some(r) = self.fixed_radius {
            return r;
        }
        let n = T::from_usize_lossy(self.visits(s, a).max(1) as usize);
        let c = T::lit(CONFIDENCE_CONSTANT) * T::from_usize_lossy(self.num_states);
        (c * self.log_term / n).sqrt().min(T::lit(2.0))
    }

    /// Empirical kernel, uniform on unvisited pairs. Row-major `(s, a, s')`.
    pub fn empirical(&self) -> Vec<T> {
        let ns = self.num_states;
        let mut p = vec![T::zero(); self.visits.len() * ns];
        for (idx, &n) in self.visits.iter().enumerate() {
            let row = &mut p[idx * ns..(idx + 1) * ns];
            if n == 0 {
                row.fill(T::one() / T::from_usize_lossy(ns));
            } else {
                let total = T::from_usize_lossy(n as usize);
                for (j, x) in row.iter_mut().enumerate() {
                    *x = T::from_usize_lossy(self.transitions[idx * ns + j] as usize) / total;
                }
            }
        }
        p
    }
}

/// Maximizer of `p . u` over `{ p in simplex : ||p - p_hat||_1 <= radius }`.
/// `order` lists states by decreasing `u`.
pub fn optimistic_transition<T: Real>(p_hat: &[T], radius: T, order: &[usize]) -> Vec<T> {
    let mut p = p_hat.to_vec();
    let top = order[0];
    p[top] = (p_hat[top] + radius / T::lit(2.0)).min(T::one());
    let mut total: T = p.iter().copied().sum();
    for &l in order.iter().rev() {
        if total <= T::one() {
            break;
        }
        if l == top {
            continue;
        }
        let excess = total - T::one();
        let cut = excess.min(p[l]);
        p[l] -= cut;
        total -= cut;
    }
    p
}

/// States sorted by decreasing value, ties by lower index.
pub(crate) fn descending_order<T: Real>(u: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].partial_cmp(&u[i]).expect("finite values").then(i.cmp(&j)));
    order
}

#[derive(Debug, Clone)]
pub struct EviResult<T> {
    pub value: ValueFunction<T>,
    pub policy: Policy<T>,
    /// Maximizing kernel for the greedy actions, row-major `(s, a, s')`.
    pub transition: Vec<T>,
}

/// Extended value iteration from `u_0 = 0` on the aperiodic transform of the
/// optimistic model. Stops after `iters` sweeps or once the span of the
/// increment falls below `1 / sqrt(iters)`.
pub fn extended_value_iteration<T: Real>(
    conf: &ConfidenceSet<T>,
    p_hat: &[T],
    reward: &[T],
    iters: usize,
) -> EviResult<T> {
    let (ns, na) = (conf.num_states, conf.num_actions);
    let iters = iters.max(1);
    let stop = T::one() / T::from_usize_lossy(iters).sqrt();
    let tau = T::lit(APERIODICITY_TAU);
    let mut u = vec![T::zero(); ns];
    let mut next = vec![T::zero(); ns];
    let mut actions = vec![0; ns];
    let mut kernel = vec![T::zero(); ns * na * ns];
    let mut q = vec![T::zero(); na];
    let mut residual = T::infinity();
    let mut gain = T::zero();
    let mut sweeps = 0;
    while sweeps < iters {
        sweeps += 1;
        let order = descending_order(&u);
        for s in 0..ns {
            for (a, qa) in q.iter_mut().enumerate() {
                let idx = s * na + a;
                let row = optimistic_transition(&p_hat[idx * ns..(idx + 1) * ns], conf.radius(s, a), &order);
                let ev: T = row.iter().zip(&u).map(|(&p, &x)| p * x).sum();
                *qa = reward[idx] + tau * u[s] + (T::one() - tau) * ev;
                kernel[idx * ns..(idx + 1) * ns].copy_from_slice(&row);
            }
            actions[s] = greedy_action(&q);
            next[s] = q[actions[s]];
        }
        let diff: Vec<T> = next.iter().zip(&u).map(|(&a, &b)| a - b).collect();
        residual = span(&diff);
        let (lo, hi) =
            diff.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &x| (l.min(x), h.max(x)));
        gain = (lo + hi) / T::lit(2.0);
        if residual <= stop {
            break;
        }
        // Shift to keep values bounded; greedy choices are shift-invariant.
        let anchor = next[0];
        for (ui, &x) in u.iter_mut().zip(&next) {
            *ui = x - anchor;
        }
    }
    EviResult {
        value: ValueFunction { v: next, gain: Some(gain), residual, iterations: sweeps },
        policy: Policy::deterministic(na, &actions),
        transition: kernel,
    }
}

/// EVI sweep budget per game iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EviBudget {
    /// `t_k = k`.
    Iteration,
    Fixed(usize),
}

impl EviBudget {
    pub fn at(self, k: usize) -> usize {
        match self {
            EviBudget::Iteration => k,
            EviBudget::Fixed(n) => n,
        }
    }
}

/// One observed transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next: usize,
}

/// Non-stationary UCRL2 with episodes of length one.
#[derive(Debug, Clone)]
pub struct Ucrl2Player<T> {
    conf: ConfidenceSet<T>,
    state: Option<usize>,
    steps: usize,
}

impl<T: Real> Ucrl2Player<T> {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, delta: T) -> Self {
        Self { conf: ConfidenceSet::new(num_states, num_actions, horizon, delta), state: None, steps: 0 }
    }

    pub fn confidence(&self) -> &ConfidenceSet<T> {
        &self.conf
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Computes the optimistic policy for `reward` with `evi_iters` sweeps,
    /// takes one step with it, and updates the confidence set.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        mdp: &TabularMdp<T>,
        reward: &[T],
        evi_iters: usize,
        rng: &mut R,
    ) -> Result<(EviResult<T>, Transition), PolicyError> {
        if reward.len() != mdp.dim() {
            return Err(PolicyError::DimensionMismatch { expected: mdp.dim(), got: reward.len() });
        }
        let s = match self.state {
            Some(s) => s,
            None => mdp.sample_initial(rng),
        };
        let evi = extended_value_iteration(&self.conf, &self.conf.empirical(), reward, evi_iters);
        let a = evi.policy.as_deterministic().expect("greedy policy")[s];
        let next = mdp.sample_next(s, a, rng);
        self.conf.record(s, a, next);
        self.state = Some(next);
        self.steps += 1;
        Ok((evi, Transition { state: s, action: a, next }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_random_mdp, Mode};
    use crate::policy::best_response;

    #[test]
    fn sorted_allocation_by_hand() {
        let p = optimistic_transition(&[0.5_f64, 0.5], 0.4, &[1, 0]);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn sorted_allocation_matches_discretized_ball() {
        let u = [0.0, 1.0];
        let p = optimistic_transition(&[0.5, 0.5], 0.4, &descending_order(&u));
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .filter(|&x| (x - 0.5).abs() + (0.5 - x).abs() <= 0.4 + 1e-12)
            .map(|x| x * u[0] + (1.0 - x) * u[1])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((p[0] * u[0] + p[1] * u[1] - best).abs() < 1e-3);
    }

    #[test]
    fn allocation_three_states() {
        // Mass 0.3 moves to the best state, taken from the worst first.
        let p = optimistic_transition(&[0.2_f64, 0.5, 0.3], 0.6, &[0, 2, 1]);
        let want = [0.5, 0.2, 0.3];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn zero_radius_reduces_to_best_response() {
        for seed in 0..5 {
            let mdp = make_random_mdp::<f64>(4, 3, 3, seed, Mode::Average).unwrap();
            let r: Vec<f64> = (0..12).map(|i| ((i * 5 + seed as usize) % 7) as f64 / 7.0).collect();
            let (conf, p) = ConfidenceSet::with_model(&mdp, 0.0);
            let evi = extended_value_iteration(&conf, &p, &r, 100_000_000);
            let br = best_response(&mdp, &r, 1e-12).unwrap();
            assert_eq!(evi.policy, br.policy, "seed {seed}");
        }
    }

    #[test]
    fn fresh_state_puts_mass_on_best_successor() {
        let conf = ConfidenceSet::<f64>::new(3, 2, 100, 0.1);
        assert_eq!(conf.radius(0, 0), 2.0);
        let p_hat = conf.empirical();
        let r = [0.0, 0.05, 0.1, 0.9, -0.5, 0.2];
        // Sweep 1 gives u_1 = max_a r = (0.05, 0.9, 0.2), whose span exceeds
        // 1/sqrt(2), so a second sweep runs. The radius-2 ball contains every
        // vertex, so each row becomes the point mass on argmax u_1 = state 1
        // and u_2(s) = max_a r(s, a) + tau u_1(s) + (1 - tau) max u_1.
        let evi = extended_value_iteration(&conf, &p_hat, &r, 2);
        assert_eq!(evi.value.iterations, 2);
        for idx in 0..6 {
            let row = &evi.transition[idx * 3..(idx + 1) * 3];
            assert!(row.iter().zip([0.0, 1.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-15), "{row:?}");
        }
        let u1 = [0.05, 0.9, 0.2];
        let u2: Vec<f64> = (0..3).map(|s| u1[s] + 0.5 * u1[s] + 0.5 * 0.9).collect();
        let v = &evi.value.v;
        for s in 1..3 {
            assert!(((v[s] - v[0]) - (u2[s] - u2[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn larger_radius_is_more_optimistic() {
        let mdp = make_random_mdp::<f64>(4, 2, 4, 2, Mode::Average).unwrap();
        let r: Vec<f64> = (0..8).map(|i| (i % 3) as f64 / 3.0).collect();
        let mut last = f64::NEG_INFINITY;
        for radius in [0.0, 0.1, 0.3, 0.8, 2.0] {
            let (conf, p) = ConfidenceSet::with_model(&mdp, radius);
            let gain = extended_value_iteration(&conf, &p, &r, 1_000_000).value.gain.unwrap();
            assert!(gain >= last - 1e-6, "{radius}: {gain} < {last}");
            last = gain;
        }
    }

    #[test]
    fn optimism_with_true_model_inside() {
        let mdp = make_random_mdp::<f64>(4, 2, 4, 3, Mode::Average).unwrap();
        let r: Vec<f64> = (0..8).map(|i| ((i * 3) % 5) as f64 / 5.0).collect();
        let best = best_response(&mdp, &r, 1e-12).unwrap().achieved(&r);
        for t in [4, 16, 64, 256] {
            for radius in [0.0, 0.2, 1.0] {
                let (conf, p) = ConfidenceSet::with_model(&mdp, radius);
                let gain = extended_value_iteration(&conf, &p, &r, t).value.gain.unwrap();
                assert!(gain >= best - 1.0 / (t as f64).sqrt(), "t={t} radius={radius}");
            }
        }
    }

    #[test]
    fn radii_shrink_with_counts() {
        let mut conf = ConfidenceSet::<f64>::new(4, 1, 1000, 0.05);
        let mut last = conf.radius(0, 0);
        assert!(last <= 2.0);
        for _ in 0..500 {
            conf.record(0, 0, 1);
            let r = conf.radius(0, 0);
            assert!(r <= last && r <= 2.0);
            last = r;
        }
        assert!(last < 2.0);
        assert_eq!(conf.empirical()[1], 1.0);
    }
}
