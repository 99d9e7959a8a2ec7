//! Relative prediction-error metrics, per-parameter evaluation records and
//! cross-method comparison summaries.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::col_norm;

/// Truth columns with a norm at or below this are excluded from error
/// averaging (their relative error is meaningless).
pub const WEAK_NORM_CUTOFF: f64 = 1e-14;

/// A relative error above this flags the prediction as diverged.
pub const DIVERGENCE_DELTA: f64 = 1e3;

/// Non-finite errors are recorded as this finite sentinel so that report
/// files stay representable; anything this large is far past the
/// divergence flag anyway.
pub const DELTA_CLAMP: f64 = 1e300;

/// Relative error `||truth - pred|| / ||truth||` of one state.
pub fn residual_error(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "residual_error over {} vs {} entries",
            truth.len(),
            pred.len()
        )));
    }
    let norm: f64 = truth.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::InvalidInput("truth has non-finite entries".into()));
    }
    if norm <= WEAK_NORM_CUTOFF {
        return Err(Error::DegenerateInput(format!(
            "truth norm {norm:e} at or below {WEAK_NORM_CUTOFF:e}"
        )));
    }
    let mut diff = 0.0;
    for (t, p) in truth.iter().zip(pred) {
        let d = t - p;
        diff += d * d;
    }
    let delta = diff.sqrt() / norm;
    Ok(if delta.is_finite() { delta } else { DELTA_CLAMP })
}

/// Error series of one prediction against the matching truth columns.
/// The average runs over every retained column, including the first one
/// (the modal projection of the initial condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    /// Relative error per column, weak-truth columns skipped.
    pub delta: Vec<f64>,
    /// Arithmetic mean of `delta`.
    pub time_averaged: f64,
    /// Columns excluded because the truth norm fell below the cutoff.
    pub excluded_columns: usize,
    /// True when any retained error exceeds [`DIVERGENCE_DELTA`].
    pub diverged: bool,
}

/// Column-wise relative errors plus their time average.
pub fn time_averaged_error(truth: MatRef<'_, f64>, pred: MatRef<'_, f64>) -> Result<ErrorSeries> {
    if truth.nrows() != pred.nrows() || truth.ncols() != pred.ncols() {
        return Err(Error::InvalidInput(format!(
            "trajectory shapes disagree: {}x{} vs {}x{}",
            truth.nrows(),
            truth.ncols(),
            pred.nrows(),
            pred.ncols()
        )));
    }
    if truth.ncols() == 0 {
        return Err(Error::InvalidInput("empty trajectories".into()));
    }

    let mut delta = Vec::with_capacity(truth.ncols());
    let mut excluded = 0usize;
    for k in 0..truth.ncols() {
        let tn = col_norm(truth, k);
        if !tn.is_finite() {
            return Err(Error::InvalidInput(format!(
                "truth column {k} has non-finite entries"
            )));
        }
        if tn <= WEAK_NORM_CUTOFF {
            excluded += 1;
            continue;
        }
        let mut diff = 0.0;
        for i in 0..truth.nrows() {
            let d = truth[(i, k)] - pred[(i, k)];
            diff += d * d;
        }
        let e = diff.sqrt() / tn;
        delta.push(if e.is_finite() { e } else { DELTA_CLAMP });
    }
    if delta.is_empty() {
        return Err(Error::DegenerateInput(
            "every truth column fell below the weak-norm cutoff".into(),
        ));
    }
    let time_averaged = delta.iter().sum::<f64>() / delta.len() as f64;
    let diverged = delta.iter().any(|&d| d > DIVERGENCE_DELTA);
    Ok(ErrorSeries {
        delta,
        time_averaged,
        excluded_columns: excluded,
        diverged,
    })
}

/// Evaluation outcome at one test parameter. A prediction the model refused
/// to produce (detected divergence) has an empty series, no average and
/// `diverged = true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub time_averaged: Option<f64>,
    pub excluded_columns: usize,
    pub diverged: bool,
    /// Extra context: divergence reason, extrapolation notice.
    pub note: Option<String>,
}

impl EvalEntry {
    pub fn from_series(theta: Vec<f64>, series: ErrorSeries, note: Option<String>) -> Self {
        Self {
            theta,
            delta: series.delta,
            time_averaged: Some(series.time_averaged),
            excluded_columns: series.excluded_columns,
            diverged: series.diverged,
            note,
        }
    }

    pub fn refused(theta: Vec<f64>, reason: String) -> Self {
        Self {
            theta,
            delta: Vec::new(),
            time_averaged: None,
            excluded_columns: 0,
            diverged: true,
            note: Some(reason),
        }
    }
}

/// Per-method evaluation over a shared set of test parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    /// Hash of the run configuration that produced this report.
    pub config_hash: String,
    /// Prediction steps per parameter.
    pub horizon: usize,
    pub entries: Vec<EvalEntry>,
}

/// Five-number summary of the non-diverged time-averaged errors of one
/// method. `None` summaries mean every entry diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Entries that produced a usable average.
    pub count: usize,
    pub diverged: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

/// Side-by-side method summaries over identical test parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash: String,
    pub rows: Vec<MethodSummary>,
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule:
/// rank `(len - 1) * q` interpolated between its neighbors).
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Summarize reports that share a configuration and test-parameter list.
pub fn compare_methods(reports: &[EvalReport]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to compare".into()));
    }
    let hash = &reports[0].config_hash;
    let thetas: Vec<&Vec<f64>> = reports[0].entries.iter().map(|e| &e.theta).collect();
    for rep in reports {
        if &rep.config_hash != hash {
            return Err(Error::InvalidInput(format!(
                "report '{}' has config hash {}, expected {hash}",
                rep.method, rep.config_hash
            )));
        }
        if rep.entries.len() != thetas.len()
            || rep
                .entries
                .iter()
                .zip(&thetas)
                .any(|(e, t)| &&e.theta != t)
        {
            return Err(Error::InvalidInput(format!(
                "report '{}' covers different test parameters",
                rep.method
            )));
        }
    }

    let mut rows = Vec::with_capacity(reports.len());
    for rep in reports {
        let mut avgs: Vec<f64> = rep
            .entries
            .iter()
            .filter(|e| !e.diverged)
            .filter_map(|e| e.time_averaged)
            .collect();
        avgs.sort_by(f64::total_cmp);
        let diverged = rep.entries.iter().filter(|e| e.diverged).count();
        rows.push(MethodSummary {
            method: rep.method.clone(),
            count: avgs.len(),
            diverged,
            min: avgs.first().copied(),
            q1: quantile(&avgs, 0.25),
            median: quantile(&avgs, 0.5),
            q3: quantile(&avgs, 0.75),
            max: avgs.last().copied(),
        });
    }
    Ok(Comparison {
        config_hash: hash.clone(),
        rows,
    })
}
