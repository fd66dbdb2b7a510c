//! Game traces and their on-disk forms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Certified bracket `lower <= f^OPT <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBounds<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> GapBounds<T> {
    pub fn gap(&self) -> T {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    /// Cost handed to the policy player (before normalization).
    pub lambda: Vec<T>,
    pub d: Vec<T>,
    /// `L(d^k, lambda^k)`.
    pub lagrangian: T,
    /// `f(d_bar^k)`.
    pub f_bar: T,
    /// Filled at checkpoints only.
    pub gap: Option<GapBounds<T>>,
    /// Average regret of the policy player against the best fixed occupancy
    /// in hindsight; checkpoints only.
    pub regret_pi: Option<T>,
    /// Average regret of the cost player.
    pub regret_lambda: T,
    /// `g_i(d_bar^k)`.
    pub residuals: Vec<T>,
    /// Cumulative environment steps of the policy player(s).
    pub samples: usize,
    /// Cumulative wall time; 0 unless recording is enabled.
    pub ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub d_bar: Vec<T>,
    pub lambda_bar: Vec<T>,
    /// Mixture weights of `d^k` in `d_bar`; `None` means the uniform average.
    pub weights: Option<Vec<T>>,
    /// Set when some `f*` value came from a finite-grid estimate.
    pub lagrangian_is_estimate: bool,
    pub cost_bound: T,
    pub mu_bar: Vec<T>,
    /// `(L(d_bar, lambda_bar), f(d_bar))` for non-convex objectives.
    pub nonconvex_bounds: Option<GapBounds<T>>,
    /// Iterations where an approximate player reported an insufficient budget.
    pub budget_warnings: usize,
}

impl<T: Real> GameTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> &IterationRecord<T> {
        self.records.last().expect("traces have at least one iteration")
    }

    pub fn num_constraints(&self) -> usize {
        self.mu_bar.len()
    }

    pub fn final_gap(&self) -> Option<GapBounds<T>> {
        self.last().gap
    }

    /// `d_bar` rebuilt from the logged iterates.
    pub fn recompute_average(&self) -> Vec<T> {
        let dim = self.d_bar.len();
        let mut acc = vec![T::zero(); dim];
        let k = T::from_usize_lossy(self.records.len());
        for (j, r) in self.records.iter().enumerate() {
            let w = match &self.weights {
                Some(w) => w[j],
                None => T::one() / k,
            };
            for (a, &x) in acc.iter_mut().zip(&r.d) {
                *a += w * x;
            }
        }
        acc
    }

    pub fn csv_header(num_constraints: usize) -> Vec<String> {
        let mut h: Vec<String> =
            ["k", "f_bar", "gap_lower", "gap_upper", "regret_pi", "regret_lambda"].map(String::from).into();
        h.extend((1..=num_constraints).map(|i| format!("residual_{i}")));
        h.push("samples".into());
        h.push("ms".into());
        h
    }

    /// One row per iteration in the fixed column order; absent values are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(self.num_constraints()))?;
        let num = |x: T| x.to_f64_lossy().to_string();
        let opt = |x: Option<T>| x.map(num).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.k.to_string(),
                num(r.f_bar),
                opt(r.gap.map(|g| g.lower)),
                opt(r.gap.map(|g| g.upper)),
                opt(r.regret_pi),
                num(r.regret_lambda),
            ];
            row.extend(r.residuals.iter().map(|&x| num(x)));
            row.push(r.samples.to_string());
            row.push(r.ms.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> TraceSummary {
        let last = self.last();
        let v = |xs: &[T]| xs.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let g = |b: GapBounds<T>| GapBounds { lower: b.lower.to_f64_lossy(), upper: b.upper.to_f64_lossy() };
        TraceSummary {
            iterations: self.iterations(),
            f_bar: last.f_bar.to_f64_lossy(),
            gap: last.gap.map(g),
            regret_pi: last.regret_pi.map(|x| x.to_f64_lossy()),
            regret_lambda: last.regret_lambda.to_f64_lossy(),
            residuals: v(&last.residuals),
            samples: last.samples,
            d_bar: v(&self.d_bar),
            lambda_bar: v(&self.lambda_bar),
            mu_bar: v(&self.mu_bar),
            nonconvex_bounds: self.nonconvex_bounds.map(g),
            lagrangian_is_estimate: self.lagrangian_is_estimate,
            budget_warnings: self.budget_warnings,
        }
    }
}

/// Final state of a trace in plain `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub f_bar: f64,
    pub gap: Option<GapBounds<f64>>,
    pub regret_pi: Option<f64>,
    pub regret_lambda: f64,
    pub residuals: Vec<f64>,
    pub samples: usize,
    pub d_bar: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub mu_bar: Vec<f64>,
    pub nonconvex_bounds: Option<GapBounds<f64>>,
    pub lagrangian_is_estimate: bool,
    pub budget_warnings: usize,
}
