//! Config-driven experiment runner for the `convex-mdp` solver: JSON configs,
//! seed fan-out, CSV/JSON artifacts, the bundled suites and the rate report.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod report;
pub mod runner;
pub mod suites;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use report::{emit_rate_report, fit_rate, RateFit, RateReport};
pub use runner::{run_experiment, RunReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Game(#[from] convex_mdp::game::GameError),
    #[error(transparent)]
    Mdp(#[from] convex_mdp::mdp::MdpError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{config}: {points} distinct K values, need at least {}", report::MIN_POINTS)]
    InsufficientPoints { config: String, points: usize },
    #[error("no trace CSVs under {0}")]
    NoTraces(PathBuf),
}
