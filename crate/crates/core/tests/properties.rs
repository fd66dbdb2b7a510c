use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use convex_mdp::cost::{CostAlgorithm, Bregman, LearningRate};
use convex_mdp::game::{run_game, GameOptions, Players};
use convex_mdp::mdp::{
    make_deep_sea, make_gridworld, make_random_mdp, occupancy_of_policy, policy_of_occupancy, validate_occupancy,
    Mode, Policy, TabularMdp,
};
use convex_mdp::objectives::{
    gradient_check, l2_apprenticeship_objective, ConvexObjective, ExpertOccupancy, NegEntropy,
};
use convex_mdp::policy::PolicyPlayerConfig;

fn mode_strategy() -> impl Strategy<Value = Mode<f64>> {
    prop_oneof![Just(Mode::Average), (0.5..0.99f64).prop_map(|gamma| Mode::Discounted { gamma })]
}

fn policy_strategy(ns: usize, na: usize) -> impl Strategy<Value = Policy<f64>> {
    prop::collection::vec(0.01..1.0f64, ns * na).prop_map(move |w| {
        let probs = w
            .chunks(na)
            .flat_map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(move |x| x / s).collect::<Vec<_>>()
            })
            .collect();
        Policy::new(ns, na, probs).unwrap()
    })
}

fn rows_stochastic(mdp: &TabularMdp<f64>) -> bool {
    (0..mdp.num_states()).all(|s| {
        (0..mdp.num_actions()).all(|a| {
            let row = mdp.row(s, a);
            row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        })
    })
}

#[test]
fn generated_rows_are_stochastic_for_100_seeds() {
    for seed in 0..100 {
        let s = 2 + (seed as usize % 9);
        let a = 1 + (seed as usize % 4);
        let mdp = make_random_mdp::<f64>(s, a, 1 + seed as usize % s, seed, Mode::Average).unwrap();
        assert!(rows_stochastic(&mdp), "seed {seed}");
    }
    for slip in [0.0, 0.1, 0.5] {
        assert!(rows_stochastic(&make_gridworld::<f64>(5, 4, slip, Mode::Average).unwrap()));
    }
    for depth in 2..8 {
        assert!(rows_stochastic(&make_deep_sea::<f64>(depth, Mode::Average).unwrap().mdp));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn policy_occupancies_are_valid(seed in 0u64..10_000, mode in mode_strategy(), ns in 2usize..8, na in 1usize..4) {
        let mdp = make_random_mdp::<f64>(ns, na, ns.min(3), seed, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<f64> = (0..ns).flat_map(|_| {
            let w: Vec<f64> = (0..na).map(|_| rand::Rng::random::<f64>(&mut rng) + 0.01).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / t)
        }).collect();
        let policy = Policy::new(ns, na, probs).unwrap();
        let d = occupancy_of_policy(&mdp, &policy).unwrap();
        prop_assert!(validate_occupancy(&mdp, d.values()).unwrap().is_empty());
    }

    #[test]
    fn occupancy_roundtrip_recovers_policy(seed in 0u64..10_000, gamma in 0.5..0.95f64, policy in policy_strategy(4, 3)) {
        // Uniform initial mass keeps every state visited.
        let mdp = make_random_mdp::<f64>(4, 3, 3, seed, Mode::Discounted { gamma }).unwrap();
        let d = occupancy_of_policy(&mdp, &policy).unwrap();
        let back = policy_of_occupancy(&d);
        for (x, y) in back.probs().iter().zip(policy.probs()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let again = occupancy_of_policy(&mdp, &back).unwrap();
        for (x, y) in again.values().iter().zip(d.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_gradients_match_finite_differences(w in prop::collection::vec(0.05..1.0f64, 12)) {
        let t: f64 = w.iter().sum();
        let d: Vec<f64> = w.iter().map(|x| x / t).collect();
        let expert = ExpertOccupancy::empirical(vec![1.0 / 12.0; 12]);
        let l2 = l2_apprenticeship_objective(&expert);
        prop_assert!(gradient_check(&NegEntropy, &d, 1e-6).unwrap() <= 1e-5);
        prop_assert!(gradient_check(&l2, &d, 1e-6).unwrap() <= 1e-5);
    }

    #[test]
    fn fenchel_young_holds(w in prop::collection::vec(0.01..1.0f64, 6), y in prop::collection::vec(-3.0..3.0f64, 6)) {
        let t: f64 = w.iter().sum();
        let d: Vec<f64> = w.iter().map(|x| x / t).collect();
        let expert = ExpertOccupancy::empirical(vec![0.2, 0.1, 0.3, 0.1, 0.2, 0.1]);
        let l2 = l2_apprenticeship_objective(&expert);
        let lhs = |f: &dyn ConvexObjective<f64>| f.value(&d) + f.conjugate(&y).unwrap();
        let dy: f64 = d.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(lhs(&NegEntropy) >= dy - 1e-12);
        prop_assert!(lhs(&l2) >= dy - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn game_traces_satisfy_invariants(seed in 0u64..1000, mode in mode_strategy(), omd in any::<bool>()) {
        let mdp = make_random_mdp::<f64>(4, 2, 3, seed, mode).unwrap();
        let expert = ExpertOccupancy::exact(&occupancy_of_policy(&mdp, &Policy::uniform(4, 2)).unwrap());
        let f = l2_apprenticeship_objective(&expert);
        let cost = if omd {
            CostAlgorithm::Omd { bregman: Bregman::L2, rate: LearningRate { c: 0.5, exponent: 0.5 } }
        } else {
            CostAlgorithm::Ftl
        };
        let players = Players { cost, policy: PolicyPlayerConfig::exact(), seed };
        let trace = run_game(&mdp, &f, &players, 64, &GameOptions::default()).unwrap();
        for (a, b) in trace.recompute_average().iter().zip(&trace.d_bar) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for r in &trace.records {
            prop_assert!(validate_occupancy(&mdp, &r.d).unwrap().is_empty());
            if let Some(g) = r.gap {
                prop_assert!(g.upper - g.lower >= -1e-8);
            }
        }
    }
}

/// Sampled rollouts agree with the exact occupancy: for the discounted
/// criterion the state-action at a Geometric(1 - gamma) stopping time is
/// distributed as `d`; for the average criterion long-run frequencies are.
#[test]
fn rollouts_match_exact_occupancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for mode in [Mode::Discounted { gamma: 0.8 }, Mode::Average] {
        let mdp = make_random_mdp::<f64>(4, 2, 3, 9, mode).unwrap();
        let policy = Policy::new(4, 2, vec![0.3, 0.7, 0.5, 0.5, 0.9, 0.1, 0.2, 0.8]).unwrap();
        let d = occupancy_of_policy(&mdp, &policy).unwrap();
        let mut counts = [0usize; 8];
        let n = 200_000;
        match mode {
            Mode::Discounted { gamma } => {
                for _ in 0..n {
                    let mut s = mdp.sample_initial(&mut rng);
                    loop {
                        let a = policy.sample_action(s, &mut rng);
                        if rand::Rng::random::<f64>(&mut rng) >= gamma {
                            counts[s * 2 + a] += 1;
                            break;
                        }
                        s = mdp.sample_next(s, a, &mut rng);
                    }
                }
            }
            Mode::Average => {
                let mut s = mdp.sample_initial(&mut rng);
                for _ in 0..n {
                    let a = policy.sample_action(s, &mut rng);
                    counts[s * 2 + a] += 1;
                    s = mdp.sample_next(s, a, &mut rng);
                }
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            assert_abs_diff_eq!(c as f64 / n as f64, d.values()[i], epsilon = 0.01);
        }
    }
}
