use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the recovery library.
///
/// Solver non-convergence is *not* an error: it is reported through
/// [`crate::SolveStatus`] so that experiment sweeps can keep going.
#[derive(Debug, Error)]
pub enum CprError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration budget exceeded: {needed} candidate supports > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CprError>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl Into<String>,
    actual: impl Into<String>,
) -> CprError {
    CprError::DimensionMismatch {
        context,
        expected: expected.into(),
        actual: actual.into(),
    }
}
