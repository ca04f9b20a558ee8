use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solver failure at applied strain {strain:e}: {reason}")]
    SolverFailure { strain: f64, reason: String },

    #[error("requested strain {requested} outside the solved range [0, {max}]")]
    OutOfRange { requested: f64, max: f64 },

    #[error("curve ends at strain {reached}, short of {required}")]
    CurveTooShort { reached: f64, required: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("data samples have zero mean")]
    ZeroMean,

    #[error("pooled output variance {0:e} is too small for sensitivity indices")]
    ZeroVariance(f64),

    #[error("{failed} of {total} model evaluations failed")]
    BatchFailure { failed: usize, total: usize },

    #[error("empty posterior ensemble")]
    EmptyEnsemble,

    #[error("dataset has no entries for size {0} nm")]
    MissingSize(f64),

    #[error("{file}:{line}: {reason}")]
    Parse {
        file: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
