//! Bundled experiment suites. Each writes its runs below `out` plus a
//! `summary.json` (the rates suite writes `rate_report.json` instead).

use std::fs;
use std::path::Path;

use convex_mdp::game::{run_frank_wolfe, Checkpoints, GameOptions, StepRule};
use convex_mdp::mdp::{Mode, TabularMdp};
use convex_mdp::objectives::{linear_objective, weighted_sum, ConvexObjective, NegEntropy, SkillVariant};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::report::{emit_rate_report, RateReport};
use crate::runner::{entropy, max_entropy, run_experiment, variant_name, RunReport, Stat};
use crate::RunError;

/// Frank-Wolfe iterations behind the entropy oracles.
pub const ORACLE_FW_ITERS: usize = 20_000;
const BISECTION_FW_ITERS: usize = 5000;
const BISECTION_STEPS: usize = 30;

fn write_summary<S: Serialize>(out: &Path, summary: &S) -> Result<(), RunError> {
    fs::create_dir_all(out).map_err(|source| RunError::Io { path: out.to_path_buf(), source })?;
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(summary)?).map_err(|source| RunError::Io { path, source })
}

/// Parses `config` (with `output_dir` set to `dir`), validates and runs it.
pub fn run_value(mut config: Value, dir: &Path) -> Result<RunReport, RunError> {
    config["output_dir"] = json!(dir);
    let exp = ExperimentConfig::from_json(&config.to_string())?.validate()?;
    run_experiment(&exp)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_pi r . d_pi` by plain value iteration on the discounted criterion,
/// independent of the solver's best-response code.
pub fn value_iteration_optimum(mdp: &TabularMdp<f64>, reward: &[f64]) -> f64 {
    let Mode::Discounted { gamma } = mdp.mode() else {
        panic!("value_iteration_optimum needs a discounted MDP");
    };
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| reward[s * na + a] + gamma * dot(mdp.row(s, a), &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta <= 1e-14 {
            break;
        }
    }
    (1.0 - gamma) * dot(mdp.initial(), &v)
}

fn final_only() -> GameOptions<f64> {
    GameOptions { checkpoints: Checkpoints::Final, ..Default::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub row: String,
    pub objective: String,
    pub cost_player: String,
    pub policy_player: String,
    pub f_final: f64,
    /// Certified duality gap, or the weak-duality bracket width for the
    /// non-convex skill objective.
    pub gap: Option<f64>,
    /// Independent optimum of the row, where one is cheap to compute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
}

fn gridworld(width: usize) -> Value {
    json!({ "type": "gridworld", "width": width, "height": width, "slip_prob": 0.1, "mode": "discounted", "gamma": 0.9 })
}

fn table1_configs() -> Vec<(&'static str, Value)> {
    let random = json!({ "type": "random", "num_states": 6, "num_actions": 3, "branching": 3, "seed": 11,
                         "mode": "discounted", "gamma": 0.9 });
    let expert = json!({ "expert": { "kind": "random", "seed": 3 } });
    // Cost of action 0 everywhere: caps how often the first action is used.
    let first_action: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    vec![
        ("standard_rl", json!({ "env": random, "objective": "linear", "reward_seed": 5, "K": 1 })),
        (
            "l2_al",
            json!({ "env": gridworld(4), "objective": "l2_al", "policies": expert, "expert_policy_ref": "expert",
                    "cost_player": "ogd", "K": 512 }),
        ),
        ("pure_exploration", json!({ "env": gridworld(4), "objective": "neg_entropy", "K": 2000 })),
        (
            "linf_al",
            json!({ "env": gridworld(4), "objective": "linf_al", "policies": expert, "expert_policy_ref": "expert",
                    "cost_player": "ogd", "K": 512 }),
        ),
        (
            "constrained",
            json!({ "env": { "type": "random", "num_states": 4, "num_actions": 2, "branching": 2, "seed": 21,
                             "mode": "discounted", "gamma": 0.9 },
                    "objective": "linear", "reward_seed": 8,
                    "constraints": [ { "type": "linear", "a": first_action, "c": 0.3 } ], "K": 2000 }),
        ),
        (
            "kl_gail",
            json!({ "env": gridworld(4), "objective": "kl", "policies": expert, "expert_policy_ref": "expert",
                    "smoothing": 0.05, "K": 512 }),
        ),
        ("diayn", json!({ "env": gridworld(4), "objective": "diayn", "num_skills": 4, "prior_seed": 7, "K": 256 })),
    ]
}

fn config_field(config: &Value, key: &str, default: &str) -> String {
    config.get(key).and_then(Value::as_str).unwrap_or(default).to_string()
}

/// One small instance per row of the game-instance table.
pub fn table1(out: &Path) -> Result<Vec<Table1Row>, RunError> {
    let mut rows = Vec::new();
    for (name, config) in table1_configs() {
        let report = run_value(config.clone(), &out.join(name))?;
        let exp = ExperimentConfig::from_json(&config.to_string())?.validate()?;
        let run = &report.runs[0];
        let s = &run.record.summary;
        let oracle = match name {
            "standard_rl" => {
                let reward: Vec<f64> = exp.linear_cost()?.iter().map(|c| -c).collect();
                Some(-value_iteration_optimum(&exp.mdp, &reward))
            }
            "pure_exploration" => Some(-max_entropy(&exp.mdp, ORACLE_FW_ITERS)?),
            _ => None,
        };
        rows.push(Table1Row {
            row: name.to_string(),
            objective: config_field(&config, "objective", ""),
            cost_player: config_field(&config, "cost_player", "ftl"),
            policy_player: config_field(&config, "policy_player", "best_response"),
            f_final: s.f_bar,
            gap: s.gap.or(s.nonconvex_bounds).map(|g| g.upper - g.lower),
            oracle,
        });
    }
    write_summary(out, &rows)?;
    Ok(rows)
}

/// Checkpoints of the rate fits: `K = 2^4 .. 2^12`.
pub fn rate_checkpoints() -> Vec<usize> {
    (4..=12).map(|e| 1usize << e).collect()
}

/// Expert of the rate and FCFW instances: a fixed smooth stochastic policy.
pub fn rate_expert_probs(num_states: usize, num_actions: usize) -> Vec<f64> {
    (0..num_states)
        .flat_map(|s| {
            let w: Vec<f64> = (0..num_actions).map(|a| 1.0 + ((s * 7 + a * 3) % 5) as f64).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / t)
        })
        .collect()
}

pub fn rates_configs() -> Vec<(&'static str, Value)> {
    let base = json!({
        "env": gridworld(5),
        "policies": { "expert": { "kind": "table", "probs": rate_expert_probs(25, 4) } },
        "K": 4096,
        "checkpoints": { "list": rate_checkpoints() },
    });
    let with = |extra: Value| {
        let mut v = base.clone();
        for (k, x) in extra.as_object().expect("object") {
            v[k] = x.clone();
        }
        v
    };
    vec![
        ("neg_entropy_ogd", with(json!({ "objective": "neg_entropy", "cost_player": "ogd" }))),
        (
            "l2_al_ogd",
            with(json!({ "objective": "l2_al", "expert_policy_ref": "expert", "cost_player": "ogd" })),
        ),
        ("l2_al_ftl", with(json!({ "objective": "l2_al", "expert_policy_ref": "expert" }))),
        ("neg_entropy_ftl", with(json!({ "objective": "neg_entropy" }))),
    ]
}

/// Gap traces at `K = 2^4 .. 2^12` and their log-log slopes.
pub fn rates(out: &Path) -> Result<RateReport, RunError> {
    for (name, config) in rates_configs() {
        run_value(config, &out.join(name))?;
    }
    emit_rate_report(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaynSummary {
    /// Final `I(z; s)` per variant, in nats.
    pub mutual_information: std::collections::BTreeMap<String, Stat>,
    pub per_seed: Vec<(u64, Vec<f64>)>,
    pub mi_beats_full: usize,
    pub no_const_beats_full: usize,
    /// Mean MI and no-constant runs closer to each other than half their
    /// margin over the full gradient.
    pub mi_close_to_no_const: bool,
}

pub fn diayn_config(seeds: usize, parallel: usize) -> Value {
    json!({
        "env": gridworld(5),
        "objective": "diayn",
        "num_skills": 8,
        "prior": "random",
        "prior_seed": 1000,
        "suite": "diayn_prior_ablation",
        "variants": ["mi", "no_const", "full"],
        "policy_player": "q_learning",
        "tol_c": 1.0,
        "q_budget": 2000,
        "K": 100,
        "checkpoints": "final",
        "seeds": (0..seeds as u64).collect::<Vec<_>>(),
        "parallel": parallel,
    })
}

/// Prior ablation with learned skill policies over ten seeds.
pub fn diayn(out: &Path, parallel: usize) -> Result<DiaynSummary, RunError> {
    let report = run_value(diayn_config(10, parallel), out)?;
    let mi_of = |v: SkillVariant| -> Vec<f64> {
        report.runs_for(Some(v)).map(|r| r.record.extras.mutual_information.unwrap_or(f64::NAN)).collect()
    };
    let variants = [SkillVariant::Mi, SkillVariant::NoConst, SkillVariant::Full];
    let values: Vec<Vec<f64>> = variants.iter().map(|&v| mi_of(v)).collect();
    let seeds: Vec<u64> = report.runs_for(Some(SkillVariant::Mi)).map(|r| r.record.seed).collect();
    let beats = |i: usize| values[i].iter().zip(&values[2]).filter(|(a, b)| a > b).count();
    let stats: Vec<Stat> = values.iter().map(|v| Stat::of(v)).collect();
    let margin = stats[0].mean.min(stats[1].mean) - stats[2].mean;
    let summary = DiaynSummary {
        mutual_information: variants.iter().zip(&stats).map(|(&v, &s)| (variant_name(v), s)).collect(),
        per_seed: seeds.iter().enumerate().map(|(i, &s)| (s, values.iter().map(|v| v[i]).collect())).collect(),
        mi_beats_full: beats(0),
        no_const_beats_full: beats(1),
        mi_close_to_no_const: margin > 0.0 && (stats[0].mean - stats[1].mean).abs() < 0.5 * margin,
    };
    write_summary(out, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepSeaSummary {
    pub max_entropy: f64,
    pub floor: f64,
    pub entropy: f64,
    pub reward: f64,
    pub oracle_beta: f64,
    pub oracle_entropy: f64,
    pub oracle_reward: f64,
    pub reward_ratio: f64,
}

pub const DEEP_SEA_DEPTH: usize = 4;

pub fn deepsea_config() -> Value {
    json!({
        "env": { "type": "deep_sea", "depth": DEEP_SEA_DEPTH, "mode": "average" },
        "objective": "linear",
        "constraints": [ { "type": "min_entropy", "fraction": 0.5 } ],
        "mu_max": 10.0,
        "mu_lr_c": 1.0,
        "K": 5000,
        "checkpoints": "final",
        "suite": "entropy_constrained_deepsea",
    })
}

/// Most rewarding occupancy with `H(d) >= floor`: bisection over `beta` in
/// `max r . d + beta H(d)`, each solved by Frank-Wolfe. Returns
/// `(beta, entropy, reward)` at the smallest feasible `beta` found.
pub fn entropy_constrained_oracle(
    mdp: &TabularMdp<f64>,
    reward: &[f64],
    floor: f64,
) -> Result<(f64, f64, f64), RunError> {
    let solve = |beta: f64| -> Result<(f64, f64), RunError> {
        let neg: Vec<f64> = reward.iter().map(|x| -x).collect();
        let terms: Vec<(f64, Box<dyn ConvexObjective<f64>>)> =
            vec![(1.0, Box::new(linear_objective(neg))), (beta, Box::new(NegEntropy))];
        let trace = run_frank_wolfe(mdp, &weighted_sum(terms), BISECTION_FW_ITERS, StepRule::Standard, &final_only())?;
        Ok((entropy(&trace.d_bar), dot(reward, &trace.d_bar)))
    };
    let (mut lo, mut hi) = (1e-4f64, 10.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        if solve(mid)?.0 >= floor {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (h, r) = solve(hi)?;
    Ok((hi, h, r))
}

/// Reward-seeking deep sea under a floor of half the maximum entropy.
pub fn deepsea(out: &Path) -> Result<DeepSeaSummary, RunError> {
    let config = deepsea_config();
    let report = run_value(config.clone(), out)?;
    let exp = ExperimentConfig::from_json(&config.to_string())?.validate()?;
    let reward = exp.env_reward.clone().expect("deep sea defines a reward");
    let h_max = max_entropy(&exp.mdp, ORACLE_FW_ITERS)?;
    let floor = 0.5 * h_max;
    let (oracle_beta, oracle_entropy, oracle_reward) = entropy_constrained_oracle(&exp.mdp, &reward, floor)?;
    let d_bar = &report.runs[0].record.summary.d_bar;
    let got = dot(&reward, d_bar);
    let summary = DeepSeaSummary {
        max_entropy: h_max,
        floor,
        entropy: entropy(d_bar),
        reward: got,
        oracle_beta,
        oracle_entropy,
        oracle_reward,
        reward_ratio: got / oracle_reward,
    };
    write_summary(out, &summary)?;
    Ok(summary)
}
