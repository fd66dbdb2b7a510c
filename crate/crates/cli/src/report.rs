//! Log-log rate fits over trace CSVs.
//!
//! Every `*.csv` below the input directory is one configuration, named by its
//! relative path without the extension. The fitted quantity is the certified
//! gap `gap_upper - gap_lower` at each checkpoint that has one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::RunError;

pub const MIN_POINTS: usize = 5;
/// Slopes above this are flagged as slower than the expected `K^{-1/2}`.
pub const SLOPE_THRESHOLD: f64 = -0.4;
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided Student-t interval on the slope.
    pub ci: [f64; 2],
    pub r_squared: f64,
    pub points: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub threshold: f64,
    pub confidence: f64,
    pub configs: BTreeMap<String, RateFit>,
    pub flagged: Vec<String>,
}

/// Least-squares fit of `ln gap` against `ln k`. Points with a nonpositive gap
/// have no logarithm and are dropped before counting.
pub fn fit_rate(config: &str, points: &[(usize, f64)]) -> Result<RateFit, RunError> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p.0 > 0 && p.1 > 0.0).map(|&(k, g)| ((k as f64).ln(), g.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let n = pts.len();
    if n < MIN_POINTS {
        return Err(RunError::InsufficientPoints { config: config.to_string(), points: n });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("df >= 3").inverse_cdf(0.5 + CONFIDENCE / 2.0);
    Ok(RateFit {
        slope,
        intercept,
        ci: [slope - t * se, slope + t * se],
        r_squared,
        points: n,
        flagged: slope > SLOPE_THRESHOLD,
    })
}

/// `(k, gap)` of every row with both certificate columns filled.
pub fn read_gaps(path: &Path) -> Result<Vec<(usize, f64)>, RunError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ik), Some(il), Some(iu)) = (col("k"), col("gap_lower"), col("gap_upper")) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let parse = |i: usize| row.get(i).filter(|s| !s.is_empty()).and_then(|s| s.parse::<f64>().ok());
        if let (Some(k), Some(lo), Some(hi)) = (row.get(ik).and_then(|s| s.parse().ok()), parse(il), parse(iu)) {
            out.push((k, hi - lo));
        }
    }
    Ok(out)
}

/// Fits every trace under `dir` and writes `dir/rate_report.json`.
pub fn emit_rate_report(dir: &Path) -> Result<RateReport, RunError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| RunError::Io { path: dir.to_path_buf(), source: e.into() })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "csv") {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(RunError::NoTraces(dir.to_path_buf()));
    }
    let mut configs = BTreeMap::new();
    for file in &files {
        let rel = file.strip_prefix(dir).unwrap_or(file).with_extension("");
        let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let fit = fit_rate(&name, &read_gaps(file)?)?;
        configs.insert(name, fit);
    }
    let flagged = configs.iter().filter(|(_, f)| f.flagged).map(|(n, _)| n.clone()).collect();
    let report = RateReport { threshold: SLOPE_THRESHOLD, confidence: CONFIDENCE, configs, flagged };
    let path = dir.join("rate_report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|source| RunError::Io { path, source })?;
    Ok(report)
}
