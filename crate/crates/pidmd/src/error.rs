//! Error and warning types shared across the workspace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failures reported by fitting, prediction, data generation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, non-finite entries, bad ranks.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Structurally valid input that carries no usable information (zero
    /// matrices, all columns excluded, empty training sets).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numerical routine did not reach the required accuracy.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// An eigenvalue magnitude fell below the log cutoff, so no
    /// continuous-time frequency can be assigned to it.
    #[error("singular eigenvalue: {0}")]
    SingularEigenvalue(String),

    /// A synthetic-system specification violates its own constraints.
    #[error("spec rejected: {0}")]
    SpecRejected(String),

    /// An interpolated model is unstable beyond the allowed growth bound or
    /// its trajectory overflowed; carries the parameter it happened at.
    #[error("divergence detected at theta={theta:?}: {reason}")]
    DivergenceDetected { theta: Vec<f64>, reason: String },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but does not parse as the expected format.
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions recorded during fitting; surfaced in model metadata
/// and promotable to failures by strict callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The requested rank exceeded the numerical rank of the data; the
    /// fit proceeded at the smaller effective rank.
    RankDeficient { requested: usize, effective: usize },
    /// The truncation boundary fell inside a tied singular-value pair and
    /// was moved by one to keep the pair together.
    RankAdjusted { requested: usize, adjusted: usize },
    /// The training parameters do not span the regression features, so part
    /// of the parameter dependence is not identifiable.
    IllConditioned { what: String },
    /// A query parameter lies outside the training range.
    Extrapolation { theta: Vec<f64> },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::RankDeficient { requested, effective } => write!(
                f,
                "rank deficient: requested {requested}, effective {effective}"
            ),
            Warning::RankAdjusted { requested, adjusted } => write!(
                f,
                "rank adjusted from {requested} to {adjusted} to avoid splitting a tied pair"
            ),
            Warning::IllConditioned { what } => write!(f, "ill-conditioned: {what}"),
            Warning::Extrapolation { theta } => {
                write!(f, "parameter {theta:?} outside the training range")
            }
        }
    }
}
