//! Experiment configuration: one flat JSON document per experiment.
//!
//! Parsing happens in two passes. Serde checks shapes and names (with the
//! JSON path of the first offending field); `validate` then checks semantic
//! invariants and cross-references against the built environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use convex_mdp::cost::{Bregman, CostAlgorithm, LearningRate};
use convex_mdp::game::{Checkpoints, Constraint, ConstraintSpec, StepRule};
use convex_mdp::mdp::{occupancy_of_policy, EnvSpec, Mode, Policy, TabularMdp};
use convex_mdp::objectives::{
    diayn_objective, kl_objective, l2_apprenticeship_objective, linear_objective, linf_apprenticeship_game,
    ConvexObjective, ExpertOccupancy, NegEntropy, SkillObjective, SkillSet, SkillVariant,
};
use convex_mdp::policy::{EviBudget, PolicyPlayerConfig, QLearningConfig, ToleranceSchedule, EXACT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invalid configuration, located by a dotted JSON path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    Linear,
    NegEntropy,
    L2Al,
    LinfAl,
    Kl,
    Diayn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostPlayerName {
    Ftl,
    /// Online gradient descent: OMD with the Euclidean Bregman divergence.
    Ogd,
    /// Multiplicative weights: OMD with the entropic Bregman divergence.
    Mw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyPlayerName {
    BestResponse,
    QLearning,
    Ucrl2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Game,
    FrankWolfe,
    FullyCorrectiveFw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTag {
    Table1Row,
    DiaynPriorAblation,
    EntropyConstrainedDeepsea,
    Rates,
}

/// `"k"` (one sweep per iteration index) or a fixed sweep count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EviBudgetSpec {
    Fixed(usize),
    Named(EviBudgetName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EviBudgetName {
    #[serde(rename = "k")]
    Iteration,
}

/// Named stationary policy, referenced by `expert_policy_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Uniform,
    /// Rows drawn from the flat Dirichlet distribution.
    Random { seed: u64 },
    Deterministic { actions: Vec<usize> },
    /// Row-major `S x A` probabilities.
    Table { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named(PriorName),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorName {
    Uniform,
    /// `u_i ~ U(0, 1)` normalized, drawn from `prior_seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintConfig {
    /// `a . d <= c`.
    Linear { a: Vec<f64>, c: f64 },
    /// `H(d) >= value`, or `H(d) >= fraction * max_{d in K} H(d)`.
    MinEntropy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fraction: Option<f64>,
    },
}

fn default_num_skills() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_parallel() -> usize {
    1
}
fn default_inner_iters() -> usize {
    100
}
fn default_delta() -> f64 {
    0.05
}
fn default_q_budget() -> usize {
    10_000
}
fn default_variants() -> Vec<SkillVariant> {
    vec![SkillVariant::Mi, SkillVariant::NoConst, SkillVariant::Full]
}

/// Experiment document. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,

    pub objective: ObjectiveName,
    /// Key into `policies` whose occupancy is the expert `d_E`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_policy_ref: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policies: BTreeMap<String, PolicySpec>,
    /// Linear objective: `f(d) = -reward . d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<Vec<f64>>,
    /// Linear objective: `f(d) = cost . d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<f64>>,
    /// Linear objective: rewards `U(0, 1)` drawn from this seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_seed: Option<u64>,
    /// KL objective: mixing weight of the uniform vector into the expert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default = "default_num_skills")]
    pub num_skills: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub prior_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<SkillVariant>,
    #[serde(default = "default_true")]
    pub maximize: bool,
    /// Variants run by the `diayn_prior_ablation` suite.
    #[serde(default = "default_variants")]
    pub variants: Vec<SkillVariant>,

    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_lr_c: Option<f64>,

    #[serde(default = "default_cost_player")]
    pub cost_player: CostPlayerName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_exp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bregman: Option<Bregman>,

    #[serde(default = "default_policy_player")]
    pub policy_player: PolicyPlayerName,
    #[serde(default = "default_schedule")]
    pub tol_schedule: ToleranceSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_c: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_evi_budget")]
    pub evi_budget: EviBudgetSpec,
    #[serde(default = "default_q_budget")]
    pub q_budget: usize,

    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_step_rule")]
    pub step_rule: StepRule,
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,

    #[serde(rename = "K", alias = "iterations")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Scheduling only; left out of echoes so artifacts do not depend on it.
    #[serde(default = "default_parallel", skip_serializing)]
    pub parallel: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteTag>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_cost_player() -> CostPlayerName {
    CostPlayerName::Ftl
}
fn default_policy_player() -> PolicyPlayerName {
    PolicyPlayerName::BestResponse
}
fn default_schedule() -> ToleranceSchedule {
    ToleranceSchedule::Constant
}
fn default_evi_budget() -> EviBudgetSpec {
    EviBudgetSpec::Named(EviBudgetName::Iteration)
}
fn default_algorithm() -> Algorithm {
    Algorithm::Game
}
fn default_step_rule() -> StepRule {
    StepRule::Standard
}
fn default_checkpoints() -> Checkpoints {
    Checkpoints::PowersOfTwo
}

/// Objective ready to run, with the skill view kept for MI reporting.
pub struct BuiltObjective {
    pub objective: Box<dyn ConvexObjective<f64>>,
    pub skills: Option<SkillObjective<f64>>,
}

/// Everything a run needs besides the seed.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mdp: TabularMdp<f64>,
    /// Extrinsic reward of the environment, when it defines one.
    pub env_reward: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path.is_empty() || path == "." { "<root>".to_string() } else { path };
            ConfigError::new(path, e.inner().to_string())
        })?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every invariant and builds the environment.
    pub fn validate(self) -> Result<Experiment, ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::new("K", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "must list at least one seed"));
        }
        if self.parallel == 0 {
            return Err(ConfigError::new("parallel", "must be at least 1"));
        }
        let (mdp, env_reward) = self.env.build::<f64>().map_err(|e| ConfigError::new("env", e.to_string()))?;
        let exp = Experiment { config: self, mdp, env_reward };
        exp.check()?;
        Ok(exp)
    }
}

impl Experiment {
    fn check(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        let dim = self.mdp.dim();
        for (name, spec) in &c.policies {
            self.build_policy(spec).map_err(|m| ConfigError::new(format!("policies.{name}"), m))?;
        }
        match c.objective {
            ObjectiveName::L2Al | ObjectiveName::LinfAl | ObjectiveName::Kl => {
                self.expert()?;
            }
            ObjectiveName::Linear => {
                self.linear_cost()?;
            }
            ObjectiveName::Diayn => {
                if c.num_skills == 0 {
                    return Err(ConfigError::new("num_skills", "must be at least 1"));
                }
                self.prior()?;
                if !c.constraints.is_empty() {
                    return Err(ConfigError::new("constraints", "not supported with diayn"));
                }
            }
            ObjectiveName::NegEntropy => {}
        }
        if c.suite == Some(SuiteTag::DiaynPriorAblation) {
            if c.objective != ObjectiveName::Diayn {
                return Err(ConfigError::new("suite", "diayn_prior_ablation requires objective diayn"));
            }
            if c.variants.is_empty() {
                return Err(ConfigError::new("variants", "must list at least one variant"));
            }
        }
        if let Some(s) = c.smoothing {
            if !(0.0..1.0).contains(&s) {
                return Err(ConfigError::new("smoothing", "must lie in [0, 1)"));
            }
        }
        for (i, con) in c.constraints.iter().enumerate() {
            let path = format!("constraints[{i}]");
            match con {
                ConstraintConfig::Linear { a, .. } if a.len() != dim => {
                    return Err(ConfigError::new(
                        format!("{path}.a"),
                        format!("expected {dim} entries, got {}", a.len()),
                    ));
                }
                ConstraintConfig::MinEntropy { value, fraction } => match (value, fraction) {
                    (Some(_), None) => {}
                    (None, Some(f)) if (0.0..=1.0).contains(f) => {}
                    (None, Some(_)) => {
                        return Err(ConfigError::new(format!("{path}.fraction"), "must lie in [0, 1]"))
                    }
                    _ => return Err(ConfigError::new(path, "set exactly one of value, fraction")),
                },
                _ => {}
            }
        }
        if !c.constraints.is_empty() && c.algorithm != Algorithm::Game {
            return Err(ConfigError::new("algorithm", "constraints require the game algorithm"));
        }
        if let Some(m) = c.mu_max {
            if m.is_nan() || m <= 0.0 {
                return Err(ConfigError::new("mu_max", "must be positive"));
            }
        }
        if c.policy_player == PolicyPlayerName::Ucrl2 && self.mdp.mode() != Mode::Average {
            return Err(ConfigError::new("policy_player", "ucrl2 requires an average-reward environment"));
        }
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(ConfigError::new("delta", "must lie in (0, 1)"));
        }
        if let Some(t) = c.tol_c {
            if t.is_nan() || t <= 0.0 {
                return Err(ConfigError::new("tol_c", "must be positive"));
            }
        }
        if c.q_budget == 0 {
            return Err(ConfigError::new("q_budget", "must be at least 1"));
        }
        if let EviBudgetSpec::Fixed(0) = c.evi_budget {
            return Err(ConfigError::new("evi_budget", "must be at least 1"));
        }
        if c.cost_player == CostPlayerName::Ftl && (c.lr_c.is_some() || c.lr_exp.is_some()) {
            return Err(ConfigError::new("lr_c", "learning rates apply to ogd and mw only"));
        }
        Ok(())
    }

    fn build_policy(&self, spec: &PolicySpec) -> Result<Policy<f64>, String> {
        let (ns, na) = (self.mdp.num_states(), self.mdp.num_actions());
        match spec {
            PolicySpec::Uniform => Ok(Policy::uniform(ns, na)),
            PolicySpec::Random { seed } => Ok(Policy::random(ns, na, &mut ChaCha8Rng::seed_from_u64(*seed))),
            PolicySpec::Deterministic { actions } => {
                if actions.len() != ns || actions.iter().any(|&a| a >= na) {
                    return Err(format!("needs {ns} actions, each below {na}"));
                }
                Ok(Policy::deterministic(na, actions))
            }
            PolicySpec::Table { probs } => Policy::new(ns, na, probs.clone()).map_err(|e| e.to_string()),
        }
    }

    fn expert(&self) -> Result<ExpertOccupancy<f64>, ConfigError> {
        let c = &self.config;
        let name = c
            .expert_policy_ref
            .as_ref()
            .ok_or_else(|| ConfigError::new("expert_policy_ref", "required by this objective"))?;
        let spec = c
            .policies
            .get(name)
            .ok_or_else(|| ConfigError::new("expert_policy_ref", format!("no policy named `{name}` in policies")))?;
        let policy = self.build_policy(spec).map_err(|m| ConfigError::new(format!("policies.{name}"), m))?;
        let d = occupancy_of_policy(&self.mdp, &policy)
            .map_err(|e| ConfigError::new(format!("policies.{name}"), e.to_string()))?;
        Ok(ExpertOccupancy::exact(&d))
    }

    /// Cost vector `c` of the linear objective `f(d) = c . d`.
    pub fn linear_cost(&self) -> Result<Vec<f64>, ConfigError> {
        let c = &self.config;
        let dim = self.mdp.dim();
        let given = [c.reward.is_some(), c.cost.is_some(), c.reward_seed.is_some()].iter().filter(|&&b| b).count();
        if given > 1 {
            return Err(ConfigError::new("reward", "set at most one of reward, cost, reward_seed"));
        }
        let check = |path: &str, v: &Vec<f64>| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(ConfigError::new(path, format!("expected {dim} entries, got {}", v.len())))
            }
        };
        if let Some(r) = &c.reward {
            check("reward", r)?;
            return Ok(r.iter().map(|x| -x).collect());
        }
        if let Some(cost) = &c.cost {
            check("cost", cost)?;
            return Ok(cost.clone());
        }
        if let Some(seed) = c.reward_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            return Ok((0..dim).map(|_| -rng.random::<f64>()).collect());
        }
        match &self.env_reward {
            Some(r) => Ok(r.iter().map(|x| -x).collect()),
            None => Err(ConfigError::new("reward", "linear objective needs reward, cost or reward_seed")),
        }
    }

    pub fn prior(&self) -> Result<Vec<f64>, ConfigError> {
        let c = &self.config;
        let n = c.num_skills;
        match c.prior.clone().unwrap_or(PriorSpec::Named(PriorName::Random)) {
            PriorSpec::Named(PriorName::Uniform) => Ok(SkillSet::<f64>::uniform_prior(n)),
            PriorSpec::Named(PriorName::Random) => {
                Ok(SkillSet::<f64>::random_prior(n, &mut ChaCha8Rng::seed_from_u64(c.prior_seed)))
            }
            PriorSpec::Explicit(p) => {
                let sum: f64 = p.iter().sum();
                if p.len() != n || p.iter().any(|&x| x.is_nan() || x <= 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(ConfigError::new("prior", format!("needs {n} positive entries summing to 1")));
                }
                Ok(p)
            }
        }
    }

    /// Objective with the DIAYN variant overridden by `variant`, if given.
    pub fn objective(&self, variant: Option<SkillVariant>) -> Result<BuiltObjective, ConfigError> {
        let c = &self.config;
        let plain = |o: Box<dyn ConvexObjective<f64>>| Ok(BuiltObjective { objective: o, skills: None });
        match c.objective {
            ObjectiveName::Linear => plain(Box::new(linear_objective(self.linear_cost()?))),
            ObjectiveName::NegEntropy => plain(Box::new(NegEntropy)),
            ObjectiveName::L2Al => plain(Box::new(l2_apprenticeship_objective(&self.expert()?))),
            ObjectiveName::LinfAl => plain(Box::new(linf_apprenticeship_game(&self.expert()?))),
            ObjectiveName::Kl => {
                let mut expert = self.expert()?;
                if let Some(eps) = c.smoothing {
                    expert = expert.smoothed(eps);
                }
                let kl = kl_objective(&expert).map_err(|e| ConfigError::new("smoothing", e.to_string()))?;
                plain(Box::new(kl))
            }
            ObjectiveName::Diayn => {
                let v = variant.or(c.variant).unwrap_or(SkillVariant::Full);
                let skills = diayn_objective(
                    self.prior()?,
                    self.mdp.num_states(),
                    self.mdp.num_actions(),
                    v,
                    c.maximize,
                )
                .map_err(|e| ConfigError::new("prior", e.to_string()))?;
                Ok(BuiltObjective { objective: Box::new(skills.clone()), skills: Some(skills) })
            }
        }
    }

    pub fn cost_algorithm(&self, objective: &dyn ConvexObjective<f64>) -> CostAlgorithm<f64> {
        let c = &self.config;
        let bregman = match (c.cost_player, c.bregman) {
            (CostPlayerName::Ftl, _) => return CostAlgorithm::Ftl,
            (_, Some(b)) => b,
            (CostPlayerName::Ogd, None) => Bregman::L2,
            (CostPlayerName::Mw, None) => Bregman::Entropy,
        };
        let dim = self.mdp.dim() * objective.blocks().max(1);
        let default = LearningRate::default_for(objective.grad_bound(), dim);
        let rate = LearningRate { c: c.lr_c.unwrap_or(default.c), exponent: c.lr_exp.unwrap_or(default.exponent) };
        CostAlgorithm::Omd { bregman, rate }
    }

    pub fn policy_config(&self) -> PolicyPlayerConfig<f64> {
        let c = &self.config;
        match c.policy_player {
            PolicyPlayerName::BestResponse => {
                PolicyPlayerConfig::BestResponse { schedule: c.tol_schedule, tol_c: c.tol_c.unwrap_or(EXACT_TOL) }
            }
            PolicyPlayerName::QLearning => PolicyPlayerConfig::QLearning {
                schedule: c.tol_schedule,
                tol_c: c.tol_c.unwrap_or(1.0),
                q_budget: c.q_budget,
                config: QLearningConfig::default(),
            },
            PolicyPlayerName::Ucrl2 => PolicyPlayerConfig::Ucrl2 {
                delta: c.delta,
                evi_budget: match c.evi_budget {
                    EviBudgetSpec::Fixed(n) => EviBudget::Fixed(n),
                    EviBudgetSpec::Named(EviBudgetName::Iteration) => EviBudget::Iteration,
                },
                horizon: c.iterations,
            },
        }
    }

    /// True when some entropy floor is a fraction of the maximum entropy.
    pub fn needs_max_entropy(&self) -> bool {
        self.config.constraints.iter().any(|c| matches!(c, ConstraintConfig::MinEntropy { value: None, .. }))
    }

    /// Constraint set; `fraction` entropy floors scale `max_entropy`.
    pub fn constraints(&self, max_entropy: f64) -> ConstraintSpec<f64> {
        let c = &self.config;
        let list = c
            .constraints
            .iter()
            .map(|con| match con {
                ConstraintConfig::Linear { a, c } => Constraint::linear(a.clone(), *c),
                ConstraintConfig::MinEntropy { value: Some(v), .. } => Constraint::min_entropy(*v),
                ConstraintConfig::MinEntropy { fraction, .. } => {
                    Constraint::min_entropy(fraction.unwrap_or(0.5) * max_entropy)
                }
            })
            .collect();
        let mut spec = ConstraintSpec::new(list);
        if let Some(m) = c.mu_max {
            spec.mu_max = m;
        }
        if let Some(lr) = c.mu_lr_c {
            spec.mu_rate = LearningRate { c: lr, exponent: 0.5 };
        }
        spec
    }
}
