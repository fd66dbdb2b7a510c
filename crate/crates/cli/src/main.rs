use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use convex_mdp_cli::{emit_rate_report, run_experiment, suites, ExperimentConfig};

#[derive(Parser)]
#[command(name = "convex-mdp", version, about = "Convex MDP solver: games, Frank-Wolfe and experiment suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds, replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Run a bundled suite.
    Suite {
        name: SuiteName,
        #[arg(long)]
        out: PathBuf,
        /// Seed fan-out of the DIAYN suite.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Summarize traces.
    Report {
        kind: ReportKind,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Table1,
    Rates,
    Diayn,
    Deepsea,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Rates,
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { config, seeds, out, parallel } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(p) = parallel {
                cfg.parallel = p;
            }
            let exp = cfg.validate()?;
            let report = run_experiment(&exp).context("run failed")?;
            for run in &report.runs {
                let s = &run.record.summary;
                let gap = s.gap.map(|g| format!("{:.3e}", g.upper - g.lower)).unwrap_or_else(|| "-".into());
                let variant = run.record.variant.map(convex_mdp_cli::runner::variant_name).unwrap_or_default();
                println!("seed {} {variant} f_bar {:.6e} gap {gap}", run.record.seed, s.f_bar);
            }
            println!("wrote {}", report.output_dir.display());
        }
        Command::Suite { name, out, parallel } => match name {
            SuiteName::Table1 => print_json(&suites::table1(&out)?)?,
            SuiteName::Rates => print_json(&suites::rates(&out)?)?,
            SuiteName::Diayn => print_json(&suites::diayn(&out, parallel)?)?,
            SuiteName::Deepsea => print_json(&suites::deepsea(&out)?)?,
        },
        Command::Report { kind: ReportKind::Rates, input } => {
            let report = emit_rate_report(&input)?;
            for (name, fit) in &report.configs {
                let flag = if fit.flagged { "  FLAGGED" } else { "" };
                println!(
                    "{name}: slope {:.3} [{:.3}, {:.3}] over {} points{flag}",
                    fit.slope, fit.ci[0], fit.ci[1], fit.points
                );
            }
        }
    }
    Ok(())
}
