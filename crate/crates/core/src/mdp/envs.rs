//! Built-in environments and their JSON description.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{MdpError, Mode, ModeTag, TabularMdp};
use crate::scalar::Real;

pub const GRID_NORTH: usize = 0;
pub const GRID_EAST: usize = 1;
pub const GRID_SOUTH: usize = 2;
pub const GRID_WEST: usize = 3;

/// Cardinal-move gridworld. State `y * width + x`; start cell is 0. The
/// intended move succeeds with probability `1 - slip_prob`, otherwise one of
/// the other three directions is taken uniformly. Off-grid moves stay put.
pub fn make_gridworld<T: Real>(
    width: usize,
    height: usize,
    slip_prob: T,
    mode: Mode<T>,
) -> Result<TabularMdp<T>, MdpError> {
    if width == 0 || height == 0 {
        return Err(MdpError::InvalidParameter("gridworld needs width, height >= 1".into()));
    }
    if !(slip_prob >= T::zero() && slip_prob < T::one()) {
        return Err(MdpError::InvalidParameter("slip_prob must lie in [0, 1)".into()));
    }
    let n = width * height;
    let mv = |cell: usize, dir: usize| -> usize {
        let (x, y) = (cell % width, cell / width);
        match dir {
            GRID_NORTH if y > 0 => cell - width,
            GRID_EAST if x + 1 < width => cell + 1,
            GRID_SOUTH if y + 1 < height => cell + width,
            GRID_WEST if x > 0 => cell - 1,
            _ => cell,
        }
    };
    let other = slip_prob / T::lit(3.0);
    let mut transition = vec![T::zero(); n * 4 * n];
    for s in 0..n {
        for a in 0..4 {
            let row = &mut transition[(s * 4 + a) * n..][..n];
            for dir in 0..4 {
                let p = if dir == a { T::one() - slip_prob } else { other };
                row[mv(s, dir)] += p;
            }
        }
    }
    let mut initial = vec![T::zero(); n];
    initial[0] = T::one();
    TabularMdp::new(n, 4, transition, initial, mode)
}

/// Triangle-shaped Deep Sea with a reward on the bottom-right corner.
#[derive(Debug, Clone)]
pub struct DeepSea<T> {
    pub depth: usize,
    pub mdp: TabularMdp<T>,
    /// Extrinsic reward over `S x A`.
    pub reward: Vec<T>,
}

impl<T: Real> DeepSea<T> {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;

    /// Index of cell `(row, col)`, `col <= row`.
    pub fn state(row: usize, col: usize) -> usize {
        debug_assert!(col <= row);
        row * (row + 1) / 2 + col
    }

    pub fn corner(&self) -> usize {
        Self::state(self.depth - 1, self.depth - 1)
    }
}

/// Deep Sea of the given depth: the agent descends one row per step from the
/// top-left cell, moving left or right. Reward 1 is paid only for moving
/// right from the bottom-right corner, so exactly one action sequence earns
/// it; every bottom-row cell returns to the start. Right moves above the
/// bottom row cost `0.01 / depth`.
pub fn make_deep_sea<T: Real>(depth: usize, mode: Mode<T>) -> Result<DeepSea<T>, MdpError> {
    if depth < 2 {
        return Err(MdpError::InvalidParameter("deep sea depth must be >= 2".into()));
    }
    let n = depth * (depth + 1) / 2;
    let mut transition = vec![T::zero(); n * 2 * n];
    let mut reward = vec![T::zero(); n * 2];
    let move_cost = T::lit(0.01) / T::from_usize_lossy(depth);
    for row in 0..depth {
        for col in 0..=row {
            let s = DeepSea::<T>::state(row, col);
            for a in 0..2 {
                let next = if row + 1 == depth {
                    0
                } else if a == DeepSea::<T>::RIGHT {
                    DeepSea::<T>::state(row + 1, col + 1)
                } else {
                    DeepSea::<T>::state(row + 1, col.saturating_sub(1))
                };
                transition[(s * 2 + a) * n + next] = T::one();
                if row + 1 < depth && a == DeepSea::<T>::RIGHT {
                    reward[s * 2 + a] = -move_cost;
                }
            }
        }
    }
    let corner = DeepSea::<T>::state(depth - 1, depth - 1);
    reward[corner * 2 + DeepSea::<T>::RIGHT] = T::one();
    let mut initial = vec![T::zero(); n];
    initial[0] = T::one();
    let mdp = TabularMdp::new(n, 2, transition, initial, mode)?;
    Ok(DeepSea { depth, mdp, reward })
}

/// Garnet-style instance: every `(s, a)` has `branching` distinct successors
/// with Dirichlet(1) weights. Uniform initial distribution.
pub fn make_random_mdp<T: Real>(
    num_states: usize,
    num_actions: usize,
    branching: usize,
    seed: u64,
    mode: Mode<T>,
) -> Result<TabularMdp<T>, MdpError> {
    if branching == 0 || branching > num_states {
        return Err(MdpError::InvalidParameter("branching must lie in 1..=S".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![T::zero(); num_states * num_actions * num_states];
    for row in transition.chunks_mut(num_states) {
        let succ = sample(&mut rng, num_states, branching);
        let weights: Vec<f64> = (0..branching).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = weights.iter().sum();
        for (j, w) in succ.iter().zip(&weights) {
            row[j] = T::lit(w / total);
        }
        // Absorb rounding so the row sums to one in T.
        let sum: T = row.iter().copied().sum();
        let last = succ.index(branching - 1);
        row[last] += T::one() - sum;
    }
    let initial = vec![T::one() / T::from_usize_lossy(num_states); num_states];
    TabularMdp::new(num_states, num_actions, transition, initial, mode)
}

/// Two states, action 0 stays and action 1 switches. Uniform initial distribution.
pub fn make_two_state_symmetric<T: Real>(mode: Mode<T>) -> TabularMdp<T> {
    let (o, z) = (T::one(), T::zero());
    TabularMdp::new(2, 2, vec![o, z, z, o, z, o, o, z], vec![T::lit(0.5); 2], mode)
        .expect("valid construction")
}

/// Criterion as written in JSON: `"mode": "average" | "discounted"` plus `"gamma"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: ModeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for ModeSpec {
    fn default() -> Self {
        Self { mode: ModeTag::Average, gamma: None }
    }
}

impl ModeSpec {
    pub fn discounted(gamma: f64) -> Self {
        Self { mode: ModeTag::Discounted, gamma: Some(gamma) }
    }

    pub fn to_mode<T: Real>(self) -> Result<Mode<T>, MdpError> {
        match self.mode {
            ModeTag::Average => Ok(Mode::Average),
            ModeTag::Discounted => {
                let gamma = self.gamma.ok_or_else(|| {
                    MdpError::InvalidParameter("discounted mode requires gamma".into())
                })?;
                Ok(Mode::Discounted { gamma: T::lit(gamma) })
            }
        }
    }

    pub fn from_mode<T: Real>(mode: Mode<T>) -> Self {
        match mode {
            Mode::Average => Self::default(),
            Mode::Discounted { gamma } => Self::discounted(gamma.to_f64_lossy()),
        }
    }
}

/// Row-major matrix with explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// JSON description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Gridworld {
        width: usize,
        height: usize,
        #[serde(default)]
        slip_prob: f64,
        #[serde(default)]
        mode: ModeTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    DeepSea {
        depth: usize,
        #[serde(default)]
        mode: ModeTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Random {
        num_states: usize,
        num_actions: usize,
        branching: usize,
        seed: u64,
        #[serde(default)]
        mode: ModeTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    TwoStateSymmetric {
        #[serde(default)]
        mode: ModeTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    /// Transition matrix of shape `[S * A, S]`, rows ordered by `(s, a)`.
    Explicit {
        num_states: usize,
        num_actions: usize,
        transition: DenseMatrix,
        initial: Vec<f64>,
        #[serde(default)]
        mode: ModeTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

/// Built environment plus the extrinsic reward, when the environment defines one.
pub type BuiltEnv<T> = (TabularMdp<T>, Option<Vec<T>>);

impl EnvSpec {
    fn mode_spec(&self) -> ModeSpec {
        let (mode, gamma) = match self {
            EnvSpec::Gridworld { mode, gamma, .. }
            | EnvSpec::DeepSea { mode, gamma, .. }
            | EnvSpec::Random { mode, gamma, .. }
            | EnvSpec::TwoStateSymmetric { mode, gamma }
            | EnvSpec::Explicit { mode, gamma, .. } => (*mode, *gamma),
        };
        ModeSpec { mode, gamma }
    }

    pub fn build<T: Real>(&self) -> Result<BuiltEnv<T>, MdpError> {
        let mode = self.mode_spec().to_mode::<T>()?;
        match self {
            EnvSpec::Gridworld { width, height, slip_prob, .. } => {
                Ok((make_gridworld(*width, *height, T::lit(*slip_prob), mode)?, None))
            }
            EnvSpec::DeepSea { depth, .. } => {
                let sea = make_deep_sea(*depth, mode)?;
                Ok((sea.mdp, Some(sea.reward)))
            }
            EnvSpec::Random { num_states, num_actions, branching, seed, .. } => {
                Ok((make_random_mdp(*num_states, *num_actions, *branching, *seed, mode)?, None))
            }
            EnvSpec::TwoStateSymmetric { .. } => Ok((make_two_state_symmetric(mode), None)),
            EnvSpec::Explicit { num_states, num_actions, transition, initial, .. } => {
                let rows = num_states * num_actions;
                if transition.shape != [rows, *num_states] || transition.data.len() != rows * num_states
                {
                    return Err(MdpError::DimensionMismatch {
                        expected: rows * num_states,
                        got: transition.data.len(),
                    });
                }
                let mdp = TabularMdp::new(
                    *num_states,
                    *num_actions,
                    transition.data.iter().map(|&p| T::lit(p)).collect(),
                    initial.iter().map(|&p| T::lit(p)).collect(),
                    mode,
                )?;
                Ok((mdp, None))
            }
        }
    }

    /// Explicit description of an arbitrary MDP.
    pub fn from_mdp<T: Real>(mdp: &TabularMdp<T>) -> Self {
        let ModeSpec { mode, gamma } = ModeSpec::from_mode(mdp.mode());
        EnvSpec::Explicit {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            transition: DenseMatrix {
                shape: [mdp.dim(), mdp.num_states()],
                data: mdp.transition().iter().map(|p| p.to_f64_lossy()).collect(),
            },
            initial: mdp.initial().iter().map(|p| p.to_f64_lossy()).collect(),
            mode,
            gamma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{occupancy_of_policy, validate_occupancy, Policy};

    #[test]
    fn unit_grid_self_loops() {
        let g = make_gridworld::<f64>(1, 1, 0.2, Mode::Average).unwrap();
        for a in 0..4 {
            assert_eq!(g.row(0, a), &[1.0]);
        }
    }

    #[test]
    fn east_moves_deterministically() {
        let g = make_gridworld::<f64>(2, 1, 0.0, Mode::Average).unwrap();
        assert_eq!(g.row(0, GRID_EAST), &[0.0, 1.0]);
        assert_eq!(g.row(1, GRID_EAST), &[0.0, 1.0]);
        assert_eq!(g.row(1, GRID_WEST), &[1.0, 0.0]);
    }

    #[test]
    fn nine_by_nine_size() {
        let g = make_gridworld::<f64>(9, 9, 0.1, Mode::Average).unwrap();
        assert_eq!((g.num_states(), g.num_actions()), (81, 4));
    }

    #[test]
    fn slip_spreads_uniformly() {
        let g = make_gridworld::<f64>(3, 3, 0.3, Mode::Average).unwrap();
        // Center cell 4, action north.
        let row = g.row(4, GRID_NORTH);
        assert!((row[1] - 0.7).abs() < 1e-15);
        for cell in [3, 5, 7] {
            assert!((row[cell] - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn deep_sea_depth_two_by_hand() {
        let sea = make_deep_sea::<f64>(2, Mode::Average).unwrap();
        // Cells (0,0), (1,0), (1,1).
        assert_eq!(sea.mdp.num_states(), 3);
        assert_eq!(sea.corner(), 2);
        assert_eq!(sea.mdp.row(0, DeepSea::<f64>::LEFT), &[0.0, 1.0, 0.0]);
        assert_eq!(sea.mdp.row(0, DeepSea::<f64>::RIGHT), &[0.0, 0.0, 1.0]);
        for s in 1..3 {
            for a in 0..2 {
                assert_eq!(sea.mdp.row(s, a), &[1.0, 0.0, 0.0]);
            }
        }
        let positive: Vec<usize> =
            (0..6).filter(|&i| sea.reward[i] > 0.0).collect();
        assert_eq!(positive, vec![5]);
    }

    /// Distinct state-visitation patterns of deterministic policies with
    /// positive reward. Action choices on cells that are never visited, and the
    /// reward-neutral choice on the bottom row, do not change the behaviour.
    fn rewarding_occupancies(depth: usize) -> usize {
        let sea = make_deep_sea::<f64>(depth, Mode::Average).unwrap();
        let n = sea.mdp.num_states();
        let mut found: Vec<Vec<f64>> = Vec::new();
        for actions in Policy::<f64>::enumerate_deterministic(n, 2) {
            let d = occupancy_of_policy(&sea.mdp, &Policy::deterministic(2, &actions)).unwrap();
            let visits = d.state_marginal();
            if d.dot(&sea.reward) > 0.0 && !found.contains(&visits) {
                found.push(visits);
            }
        }
        found.len()
    }

    #[test]
    fn deep_sea_single_rewarding_behaviour_brute_force() {
        for depth in 2..=4 {
            assert_eq!(rewarding_occupancies(depth), 1, "depth {depth}");
        }
    }

    #[test]
    fn deep_sea_single_rewarding_action_sequence() {
        // Only the on-trajectory choices matter for a deterministic policy, so
        // enumerating the 2^depth episodes covers every behaviour.
        for depth in 2..=6 {
            let sea = make_deep_sea::<f64>(depth, Mode::Average).unwrap();
            let mut hits = 0;
            for code in 0..(1usize << depth) {
                let mut s = 0;
                let mut earned = 0.0;
                for step in 0..depth {
                    let a = (code >> step) & 1;
                    earned += sea.reward[s * 2 + a].max(0.0);
                    s = sea.mdp.successors(s, a)[0].0;
                }
                if earned > 0.0 {
                    hits += 1;
                }
            }
            assert_eq!(hits, 1, "depth {depth}");
        }
    }

    #[test]
    fn deep_sea_rows_valid_for_all_policies() {
        let sea = make_deep_sea::<f64>(5, Mode::Average).unwrap();
        let d = occupancy_of_policy(&sea.mdp, &Policy::uniform(15, 2)).unwrap();
        assert!(validate_occupancy(&sea.mdp, d.values()).unwrap().is_empty());
    }

    #[test]
    fn random_mdp_is_deterministic_in_seed() {
        let a = make_random_mdp::<f64>(6, 3, 2, 42, Mode::Average).unwrap();
        let b = make_random_mdp::<f64>(6, 3, 2, 42, Mode::Average).unwrap();
        assert_eq!(a, b);
        let c = make_random_mdp::<f64>(6, 3, 2, 43, Mode::Average).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dense_branching_fills_rows() {
        let m = make_random_mdp::<f64>(5, 2, 5, 7, Mode::Average).unwrap();
        assert!(m.transition().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn env_spec_json_roundtrip() {
        let spec: EnvSpec = serde_json::from_str(
            r#"{"type": "gridworld", "width": 3, "height": 2, "slip_prob": 0.1,
                "mode": "discounted", "gamma": 0.9}"#,
        )
        .unwrap();
        let (mdp, reward) = spec.build::<f64>().unwrap();
        assert!(reward.is_none());
        let explicit = EnvSpec::from_mdp(&mdp);
        let text = serde_json::to_string(&explicit).unwrap();
        let back: EnvSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build::<f64>().unwrap().0, mdp);
        let bad = serde_json::from_str::<EnvSpec>(r#"{"type": "maze"}"#);
        assert!(bad.is_err());
        let missing_gamma: EnvSpec =
            serde_json::from_str(r#"{"type": "deep_sea", "depth": 3, "mode": "discounted"}"#)
                .unwrap();
        assert!(missing_gamma.build::<f64>().is_err());
    }
}
