use super::*;
use crate::cost::Bregman;
use crate::mdp::{
    make_gridworld, make_random_mdp, make_two_state_symmetric, occupancy_of_policy, validate_occupancy, Mode,
    Policy,
};
use crate::objectives::{l2_apprenticeship_objective, ExpertOccupancy, NegEntropy};
use crate::policy::ToleranceSchedule;

fn omd_players(c: f64) -> Players<f64> {
    Players {
        cost: CostAlgorithm::Omd { bregman: Bregman::L2, rate: LearningRate { c, exponent: 0.5 } },
        policy: PolicyPlayerConfig::exact(),
        seed: 0,
    }
}

fn brute_force_min(mdp: &TabularMdp<f64>, cost: &[f64]) -> f64 {
    Policy::<f64>::enumerate_deterministic(mdp.num_states(), mdp.num_actions())
        .map(|a| occupancy_of_policy(mdp, &Policy::deterministic(mdp.num_actions(), &a)).unwrap().dot(cost))
        .fold(f64::INFINITY, f64::min)
}

fn expert_for(mdp: &TabularMdp<f64>) -> ExpertOccupancy<f64> {
    let na = mdp.num_actions();
    let probs: Vec<f64> = (0..mdp.num_states())
        .flat_map(|s| {
            let w: Vec<f64> = (0..na).map(|a| 1.0 + ((s * 7 + a * 3) % 5) as f64).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / t)
        })
        .collect();
    let policy = Policy::new(mdp.num_states(), na, probs).unwrap();
    ExpertOccupancy::exact(&occupancy_of_policy(mdp, &policy).unwrap())
}

#[test]
fn zero_iterations_rejected() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let f = linear_objective(vec![1.0; 4]);
    let err = run_game(&mdp, &f, &Players::ftl_best_response(), 0, &GameOptions::default());
    assert_eq!(err.unwrap_err(), GameError::IterationBudgetZero);
}

#[test]
fn linear_single_iteration_is_best_response() {
    for seed in 0..5 {
        for mode in [Mode::Discounted { gamma: 0.9 }, Mode::Average] {
            let mdp = make_random_mdp::<f64>(5, 3, 3, seed, mode).unwrap();
            let c: Vec<f64> = (0..15).map(|i| ((i * 11 + seed as usize) % 9) as f64 / 4.0 - 1.0).collect();
            let f = linear_objective(c.clone());
            let trace = run_game(&mdp, &f, &Players::ftl_best_response(), 1, &GameOptions::default()).unwrap();
            assert!((trace.last().f_bar - brute_force_min(&mdp, &c)).abs() <= 1e-9);
            let gap = trace.final_gap().unwrap();
            assert!(gap.gap().abs() <= 1e-6, "{gap:?}");
        }
    }
}

#[test]
fn linear_gap_stays_zero() {
    let mdp = make_random_mdp::<f64>(4, 2, 2, 3, Mode::Average).unwrap();
    let f = linear_objective((0..8).map(|i| (i % 3) as f64 - 1.0).collect());
    let trace = run_game(&mdp, &f, &Players::ftl_best_response(), 9, &GameOptions::default()).unwrap();
    for r in &trace.records {
        if let Some(g) = r.gap {
            assert!(g.gap().abs() <= 1e-6);
        }
    }
}

#[test]
fn symmetric_entropy_reaches_uniform() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let trace = run_game(&mdp, &NegEntropy, &Players::ftl_best_response(), 4000, &GameOptions::default()).unwrap();
    let f = trace.last().f_bar;
    assert!((f + 4f64.ln()).abs() < 1e-3, "{f}");
    for &x in &trace.d_bar {
        assert!((x - 0.25).abs() < 0.01);
    }
}

#[test]
fn averaging_identity_and_sandwich() {
    let mdp = make_gridworld::<f64>(3, 3, 0.1, Mode::Discounted { gamma: 0.9 }).unwrap();
    let f = l2_apprenticeship_objective(&expert_for(&mdp));
    for players in [Players::ftl_best_response(), omd_players(0.5)] {
        let trace = run_game(&mdp, &f, &players, 200, &GameOptions::default()).unwrap();
        let again = trace.recompute_average();
        for (a, b) in again.iter().zip(&trace.d_bar) {
            assert!((a - b).abs() <= 1e-12);
        }
        for r in &trace.records {
            assert!(validate_occupancy(&mdp, &r.d).unwrap().is_empty());
            if let Some(g) = r.gap {
                assert!(g.upper - g.lower >= -1e-8, "{g:?}");
            }
        }
        let standalone = duality_gap(&trace, &f, &mdp).unwrap();
        let logged = trace.final_gap().unwrap();
        assert!((standalone.lower - logged.lower).abs() < 1e-9);
        assert!((standalone.upper - logged.upper).abs() < 1e-12);
    }
}

#[test]
fn gap_bounds_regrets() {
    // gap <= regret_pi + regret_lambda for convex f with a closed-form conjugate.
    let mdp = make_random_mdp::<f64>(4, 3, 3, 1, Mode::Average).unwrap();
    let trace = run_game(&mdp, &NegEntropy, &omd_players(2.0), 128, &GameOptions::default()).unwrap();
    for r in trace.records.iter().filter(|r| r.gap.is_some()) {
        let gap = r.gap.unwrap().gap();
        assert!(gap <= r.regret_pi.unwrap() + r.regret_lambda + 1e-9, "k={} {gap}", r.k);
    }
}

#[test]
fn runs_are_reproducible() {
    let mdp = make_random_mdp::<f64>(3, 2, 2, 8, Mode::Discounted { gamma: 0.8 }).unwrap();
    let f = l2_apprenticeship_objective(&expert_for(&mdp));
    let players = Players {
        cost: CostAlgorithm::Ftl,
        policy: PolicyPlayerConfig::QLearning {
            schedule: ToleranceSchedule::InvSqrtK,
            tol_c: 1.0,
            q_budget: 200,
            config: Default::default(),
        },
        seed: 42,
    };
    let csv = |t: &GameTrace<f64>| {
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        out
    };
    let a = run_game(&mdp, &f, &players, 20, &GameOptions::default()).unwrap();
    let b = run_game(&mdp, &f, &players, 20, &GameOptions::default()).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert!(a.last().samples > 0);
    let other = Players { seed: 43, ..players };
    let c = run_game(&mdp, &f, &other, 20, &GameOptions::default()).unwrap();
    assert_ne!(csv(&a), csv(&c));
}

#[test]
fn csv_columns_in_order() {
    assert_eq!(
        GameTrace::<f64>::csv_header(2).join(","),
        "k,f_bar,gap_lower,gap_upper,regret_pi,regret_lambda,residual_1,residual_2,samples,ms"
    );
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let trace = run_game(&mdp, &NegEntropy, &Players::ftl_best_response(), 3, &GameOptions::default()).unwrap();
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    // k = 3 is not a power of two but is the final iteration.
    assert!(lines[3].split(',').all(|f| !f.is_empty()));
    assert!(lines[3].ends_with(",0,0"));
}

#[test]
fn frank_wolfe_avg_matches_follow_the_leader() {
    for seed in 0..3 {
        let mdp = make_random_mdp::<f64>(4, 3, 3, seed, Mode::Discounted { gamma: 0.9 }).unwrap();
        let game = run_game(&mdp, &NegEntropy, &Players::ftl_best_response(), 50, &GameOptions::default()).unwrap();
        let fw = run_frank_wolfe(&mdp, &NegEntropy, 50, StepRule::Avg, &GameOptions::default()).unwrap();
        for (a, b) in game.records.iter().zip(&fw.records) {
            for (x, y) in a.d.iter().zip(&b.d).chain(a.lambda.iter().zip(&b.lambda)) {
                assert!((x - y).abs() <= 1e-12);
            }
            assert!((a.f_bar - b.f_bar).abs() <= 1e-12);
        }
    }
}

#[test]
fn frank_wolfe_single_step_on_linear() {
    let mdp = make_random_mdp::<f64>(4, 2, 2, 4, Mode::Average).unwrap();
    let c: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
    let fw = run_frank_wolfe(&mdp, &linear_objective(c.clone()), 1, StepRule::Standard, &GameOptions::default())
        .unwrap();
    assert!((fw.last().f_bar - brute_force_min(&mdp, &c)).abs() <= 1e-9);
    assert_eq!(fw.weights.as_deref(), Some(&[1.0][..]));
}

#[test]
fn frank_wolfe_weights_reproduce_average() {
    let mdp = make_gridworld::<f64>(3, 3, 0.2, Mode::Average).unwrap();
    let f = l2_apprenticeship_objective(&expert_for(&mdp));
    for trace in [
        run_frank_wolfe(&mdp, &f, 40, StepRule::Standard, &GameOptions::default()).unwrap(),
        run_fully_corrective_fw(&mdp, &f, 15, 50, &GameOptions::default()).unwrap(),
    ] {
        let w: f64 = trace.weights.as_ref().unwrap().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
        for (a, b) in trace.recompute_average().iter().zip(&trace.d_bar) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn fully_corrective_single_vertex() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let f = l2_apprenticeship_objective(&expert_for(&mdp));
    let trace = run_fully_corrective_fw(&mdp, &f, 1, 10, &GameOptions::default()).unwrap();
    assert_eq!(trace.weights.as_deref(), Some(&[1.0][..]));
    assert_eq!(trace.d_bar, trace.records[0].d);
}

#[test]
fn fully_corrective_never_worse_than_frank_wolfe() {
    for seed in 0..3 {
        let mdp = make_random_mdp::<f64>(5, 3, 3, seed, Mode::Discounted { gamma: 0.9 }).unwrap();
        let f = l2_apprenticeship_objective(&expert_for(&mdp));
        let fw = run_frank_wolfe(&mdp, &f, 30, StepRule::Standard, &GameOptions::default()).unwrap();
        let fc = run_fully_corrective_fw(&mdp, &f, 30, 200, &GameOptions::default()).unwrap();
        for (a, b) in fc.records.iter().zip(&fw.records) {
            assert!(a.f_bar <= b.f_bar + 1e-10, "seed {seed} k {}: {} > {}", a.k, a.f_bar, b.f_bar);
        }
    }
}

#[test]
fn unconstrained_spec_equals_plain_game() {
    let mdp = make_random_mdp::<f64>(4, 2, 3, 2, Mode::Average).unwrap();
    let f = l2_apprenticeship_objective(&expert_for(&mdp));
    let players = omd_players(0.3);
    let a = run_game(&mdp, &f, &players, 64, &GameOptions::default()).unwrap();
    let b = run_constrained_game(&mdp, &f, &ConstraintSpec::none(), &players, 64, &GameOptions::default()).unwrap();
    assert_eq!(a, b);
}

/// Two-state instance: maximize reward `r` subject to `a . d <= c`, solved by
/// scanning mixtures of every pair of deterministic-policy occupancies.
fn mixture_oracle(mdp: &TabularMdp<f64>, cost: &[f64], a: &[f64], c: f64) -> f64 {
    let verts: Vec<Vec<f64>> = Policy::<f64>::enumerate_deterministic(mdp.num_states(), mdp.num_actions())
        .map(|p| occupancy_of_policy(mdp, &Policy::deterministic(mdp.num_actions(), &p)).unwrap().into_values())
        .collect();
    let mut best = f64::INFINITY;
    for u in &verts {
        for v in &verts {
            for i in 0..=10_000 {
                let t = i as f64 / 10_000.0;
                let d: Vec<f64> = u.iter().zip(v).map(|(x, y)| t * x + (1.0 - t) * y).collect();
                if dot(a, &d) <= c + 1e-12 {
                    best = best.min(dot(cost, &d));
                }
            }
        }
    }
    best
}

#[test]
fn linear_constraint_matches_mixture_oracle() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    // Reward for staying in state 1; the constraint caps time spent there.
    let cost = vec![0.0, 0.0, -1.0, -0.2];
    let a = vec![0.0, 0.0, 1.0, 1.0];
    let c = 0.3;
    let want = mixture_oracle(&mdp, &cost, &a, c);
    let mut spec = ConstraintSpec::new(vec![Constraint::linear(a.clone(), c)]);
    spec.mu_rate = LearningRate { c: 1.0, exponent: 0.5 };
    let trace =
        run_constrained_game(&mdp, &linear_objective(cost), &spec, &Players::ftl_best_response(), 20_000, &GameOptions::default())
            .unwrap();
    let last = trace.last();
    assert!((last.f_bar - want).abs() <= 1e-3, "{} vs {want}", last.f_bar);
    assert!(last.residuals[0] <= 1e-3, "{:?}", last.residuals);
    let g = last.gap.unwrap();
    assert!(g.upper - g.lower >= -1e-8);
}

#[test]
fn infeasible_constraint_is_flagged() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let f = linear_objective(vec![0.0, 0.0, -1.0, 0.0]);
    // Total mass is one, so `sum d <= 0.5` is infeasible.
    let mut spec = ConstraintSpec::new(vec![Constraint::linear(vec![1.0; 4], 0.5)]);
    spec.mu_max = 5.0;
    let err = run_constrained_game(&mdp, &f, &spec, &Players::ftl_best_response(), 400, &GameOptions::default());
    assert!(matches!(err, Err(GameError::InfeasibleSuspected { .. })), "{err:?}");
}

#[test]
fn constraint_without_conjugate_rejected() {
    let mdp = make_two_state_symmetric::<f64>(Mode::Discounted { gamma: 0.9 });
    let expert = ExpertOccupancy::empirical(vec![0.25; 4]);
    let both = crate::objectives::weighted_sum::<f64>(vec![
        (1.0, Box::new(NegEntropy)),
        (1.0, Box::new(l2_apprenticeship_objective(&expert))),
    ]);
    let spec = ConstraintSpec::new(vec![Constraint { name: "mixed".into(), function: Box::new(both), offset: 0.0 }]);
    let err = run_constrained_game(&mdp, &NegEntropy, &spec, &omd_players(1.0), 5, &GameOptions::default());
    assert_eq!(err.unwrap_err(), GameError::ConjugateUnavailable("mixed".into()));
}

#[test]
fn lagrangian_examples() {
    let d = vec![0.1_f64, 0.4, 0.3, 0.2];
    let l0 = vec![1.0, -2.0, 0.5, 0.0];
    let f = linear_objective(l0.clone());
    assert!((lagrangian_value(&d, &l0, &f, std::slice::from_ref(&d)) - dot(&l0, &d)).abs() < 1e-15);
    // Fenchel-Young, and refinement can only raise the estimate of f*.
    let y = vec![0.3, -0.1, 0.2, 0.0];
    let coarse = vec![vec![0.25; 4]];
    let mut fine = coarse.clone();
    fine.push(vec![0.7, 0.1, 0.1, 0.1]);
    fine.push(d.clone());
    let lc = lagrangian_value(&d, &y, &NegEntropy, &coarse);
    let lf = lagrangian_value(&d, &y, &NegEntropy, &fine);
    assert!(lf <= lc + 1e-15);
    assert!(lf <= <NegEntropy as ConvexObjective<f64>>::value(&NegEntropy, &d) + 1e-15);
}

#[test]
fn checkpoint_schedules() {
    assert!(Checkpoints::PowersOfTwo.contains(8, 100));
    assert!(!Checkpoints::PowersOfTwo.contains(9, 100));
    assert!(Checkpoints::Final.contains(100, 100));
    assert!(!Checkpoints::Final.contains(99, 100));
    assert!(Checkpoints::List(vec![3, 7]).contains(7, 100));
}

#[test]
fn exact_player_has_no_hindsight_regret_on_fixed_cost() {
    let mdp = make_random_mdp::<f64>(3, 2, 2, 6, Mode::Average).unwrap();
    let cost: Vec<f64> = (0..6).map(|i| (i as f64).cos()).collect();
    let out = policy_regret_on_sequence(&mdp, &PolicyPlayerConfig::exact(), 0, 20, &Checkpoints::Every, RegretBenchmark::Hindsight, |_| {
        cost.clone()
    })
    .unwrap();
    assert_eq!(out.len(), 20);
    assert!(out.iter().all(|&(_, r)| r.abs() < 1e-9));
}

#[test]
fn exact_player_tracks_switching_costs() {
    let mdp = make_random_mdp::<f64>(3, 2, 2, 6, Mode::Average).unwrap();
    let cost = |k: usize| -> Vec<f64> { (0..6).map(|i| if (i + k).is_multiple_of(2) { 1.0 } else { -1.0 }).collect() };
    let run = |b| policy_regret_on_sequence(&mdp, &PolicyPlayerConfig::exact(), 0, 40, &Checkpoints::Final, b, cost);
    let per_round = run(RegretBenchmark::PerRound).unwrap();
    let hindsight = run(RegretBenchmark::Hindsight).unwrap();
    assert!(per_round[0].1.abs() < 1e-9);
    // No fixed occupancy follows the alternation, so hindsight regret is negative.
    assert!(hindsight[0].1 < -0.1);
}
