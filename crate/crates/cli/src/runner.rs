//! Runs every (variant, seed) job of an experiment and writes its artifacts.
//!
//! Layout under the output directory: `seed_<s>.csv` and `seed_<s>.json` per
//! seed (inside `<variant>/` for the DIAYN ablation), plus `aggregate.json`
//! when more than one seed ran.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use convex_mdp::game::{
    run_constrained_game, run_frank_wolfe, run_fully_corrective_fw, run_game, GameOptions, GameTrace, Players,
    StepRule, TraceSummary,
};
use convex_mdp::mdp::{occupancy_of_policy, Policy, TabularMdp};
use convex_mdp::objectives::{ConvexObjective, NegEntropy, SkillVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, Experiment, ExperimentConfig, SuiteTag};
use crate::RunError;

/// Frank-Wolfe iterations behind `fraction` entropy floors.
const MAX_ENTROPY_ITERS: usize = 5000;

/// Extra per-run quantities reported next to the trace summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extras {
    /// Mean over blocks of the state-action entropy of `d_bar`, in nats.
    pub entropy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrinsic_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutual_information: Option<f64>,
}

/// Contents of `seed_<s>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<SkillVariant>,
    pub config: ExperimentConfig,
    pub summary: TraceSummary,
    pub extras: Extras,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub record: SeedRecord,
    pub trace: GameTrace<f64>,
    /// `I(z; s)` of `d_bar^k` for every `k`, skill objectives only.
    pub mi_curve: Option<Vec<f64>>,
}

/// Mean and standard error across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub k: Vec<usize>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub seeds: Vec<u64>,
    pub f_bar: Stat,
    /// Present when every run certified a gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Stat>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<Stat>,
    pub entropy: Stat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrinsic_reward: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutual_information: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mi_curve: Option<Curve>,
}

/// Contents of `aggregate.json`: one group per variant (key `"default"`
/// outside the ablation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub groups: BTreeMap<String, GroupAggregate>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub aggregate: Option<Aggregate>,
}

impl RunReport {
    pub fn runs_for(&self, variant: Option<SkillVariant>) -> impl Iterator<Item = &SeedRun> {
        self.runs.iter().filter(move |r| r.record.variant == variant)
    }
}

pub fn entropy(d: &[f64]) -> f64 {
    -d.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// `max_{d in K} H(d)` by a long Frank-Wolfe run.
pub fn max_entropy(mdp: &TabularMdp<f64>, iterations: usize) -> Result<f64, RunError> {
    let options = GameOptions { checkpoints: convex_mdp::game::Checkpoints::Final, ..Default::default() };
    let trace = run_frank_wolfe(mdp, &NegEntropy, iterations, StepRule::Standard, &options)?;
    Ok(entropy(&trace.d_bar))
}

/// Stacked occupancies of per-block Dirichlet-random policies.
pub fn random_start(mdp: &TabularMdp<f64>, blocks: usize, seed: u64) -> Result<Vec<f64>, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5747_a127);
    let mut out = Vec::with_capacity(blocks * mdp.dim());
    for _ in 0..blocks {
        let policy = Policy::random(mdp.num_states(), mdp.num_actions(), &mut rng);
        out.extend(occupancy_of_policy(mdp, &policy)?.into_values());
    }
    Ok(out)
}

fn run_one(exp: &Experiment, seed: u64, variant: Option<SkillVariant>) -> Result<SeedRun, RunError> {
    let c = &exp.config;
    let built = exp.objective(variant)?;
    let objective: &dyn ConvexObjective<f64> = &*built.objective;
    let blocks = objective.blocks().max(1);
    let start = if built.skills.is_some() { Some(random_start(&exp.mdp, blocks, seed)?) } else { None };
    let options = GameOptions {
        checkpoints: c.checkpoints.clone(),
        record_wall_time: c.record_wall_time,
        start,
        ..Default::default()
    };
    let k = c.iterations;
    let trace = match c.algorithm {
        Algorithm::Game => {
            let players = Players { cost: exp.cost_algorithm(objective), policy: exp.policy_config(), seed };
            if c.constraints.is_empty() {
                run_game(&exp.mdp, objective, &players, k, &options)?
            } else {
                let h_max = if exp.needs_max_entropy() { max_entropy(&exp.mdp, MAX_ENTROPY_ITERS)? } else { 0.0 };
                let spec = exp.constraints(h_max);
                run_constrained_game(&exp.mdp, objective, &spec, &players, k, &options)?
            }
        }
        Algorithm::FrankWolfe => run_frank_wolfe(&exp.mdp, objective, k, c.step_rule, &options)?,
        Algorithm::FullyCorrectiveFw => run_fully_corrective_fw(&exp.mdp, objective, k, c.inner_iters, &options)?,
    };
    let block = exp.mdp.dim();
    let entropy_mean = trace.d_bar.chunks(block).map(entropy).sum::<f64>() / blocks as f64;
    let extrinsic_reward = match (&exp.env_reward, blocks) {
        (Some(r), 1) => Some(r.iter().zip(&trace.d_bar).map(|(a, b)| a * b).sum()),
        _ => None,
    };
    let mi_curve = built.skills.as_ref().map(|_| {
        let sign = if c.maximize { -1.0 } else { 1.0 };
        trace.records.iter().map(|r| sign * r.f_bar).collect::<Vec<_>>()
    });
    let mutual_information = built.skills.as_ref().map(|s| s.mutual_information(&trace.d_bar));
    let record = SeedRecord {
        seed,
        variant,
        config: c.clone(),
        summary: trace.summary(),
        extras: Extras { entropy: entropy_mean, extrinsic_reward, mutual_information },
    };
    Ok(SeedRun { record, trace, mi_curve })
}

fn variant_dir(root: &Path, variant: Option<SkillVariant>) -> PathBuf {
    match variant {
        Some(v) => root.join(variant_name(v)),
        None => root.to_path_buf(),
    }
}

pub fn variant_name(v: SkillVariant) -> String {
    serde_json::to_value(v).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn create_dir(path: &Path) -> Result<(), RunError> {
    fs::create_dir_all(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn write_run(root: &Path, run: &SeedRun) -> Result<(), RunError> {
    let dir = variant_dir(root, run.record.variant);
    create_dir(&dir)?;
    let mut csv = Vec::new();
    run.trace.write_csv(&mut csv)?;
    write_file(&dir.join(format!("seed_{}.csv", run.record.seed)), &csv)?;
    let json = serde_json::to_string_pretty(&run.record)?;
    write_file(&dir.join(format!("seed_{}.json", run.record.seed)), json.as_bytes())
}

fn aggregate_group(runs: &[&SeedRun]) -> GroupAggregate {
    let pick = |f: &dyn Fn(&SeedRun) -> f64| Stat::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let opt = |f: &dyn Fn(&SeedRun) -> Option<f64>| {
        let xs: Option<Vec<f64>> = runs.iter().map(|r| f(r)).collect();
        xs.map(|v| Stat::of(&v))
    };
    let m = runs[0].record.summary.residuals.len();
    let mi_curve = runs.iter().map(|r| r.mi_curve.as_ref()).collect::<Option<Vec<_>>>().map(|curves| {
        let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
        let stats: Vec<Stat> = (0..len).map(|i| Stat::of(&curves.iter().map(|c| c[i]).collect::<Vec<_>>())).collect();
        Curve {
            k: (1..=len).collect(),
            mean: stats.iter().map(|s| s.mean).collect(),
            se: stats.iter().map(|s| s.se).collect(),
        }
    });
    GroupAggregate {
        seeds: runs.iter().map(|r| r.record.seed).collect(),
        f_bar: pick(&|r| r.record.summary.f_bar),
        gap: opt(&|r| r.record.summary.gap.map(|g| g.upper - g.lower)),
        residuals: (0..m).map(|i| pick(&|r| r.record.summary.residuals[i])).collect(),
        entropy: pick(&|r| r.record.extras.entropy),
        extrinsic_reward: opt(&|r| r.record.extras.extrinsic_reward),
        mutual_information: opt(&|r| r.record.extras.mutual_information),
        mi_curve,
    }
}

/// Runs all jobs (up to `parallel` at a time) and writes the artifacts.
/// Results are collected in job order, so output never depends on scheduling.
pub fn run_experiment(exp: &Experiment) -> Result<RunReport, RunError> {
    let c = &exp.config;
    let variants: Vec<Option<SkillVariant>> = if c.suite == Some(SuiteTag::DiaynPriorAblation) {
        c.variants.iter().map(|&v| Some(v)).collect()
    } else {
        vec![None]
    };
    let jobs: Vec<(Option<SkillVariant>, u64)> =
        variants.iter().flat_map(|&v| c.seeds.iter().map(move |&s| (v, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(c.parallel).build()?;
    let runs: Vec<SeedRun> =
        pool.install(|| jobs.par_iter().map(|&(v, s)| run_one(exp, s, v)).collect::<Result<Vec<_>, _>>())?;

    let root = c.output_dir.clone();
    create_dir(&root)?;
    for run in &runs {
        write_run(&root, run)?;
    }
    let aggregate = (c.seeds.len() > 1).then(|| {
        let groups = variants
            .iter()
            .map(|&v| {
                let members: Vec<&SeedRun> = runs.iter().filter(|r| r.record.variant == v).collect();
                (v.map(variant_name).unwrap_or_else(|| "default".into()), aggregate_group(&members))
            })
            .collect();
        Aggregate { groups }
    });
    if let Some(agg) = &aggregate {
        write_file(&root.join("aggregate.json"), serde_json::to_string_pretty(agg)?.as_bytes())?;
    }
    Ok(RunReport { output_dir: root, runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_error_of_known_sample() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).se, 0.0);
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn variant_names_match_config_keys() {
        assert_eq!(variant_name(SkillVariant::NoConst), "no_const");
        assert_eq!(variant_name(SkillVariant::Mi), "mi");
    }
}
