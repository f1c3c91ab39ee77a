use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum UqError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient data: need at least {needed}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("rank-deficient system ({0}); use a positive penalty")]
    RankDeficient(String),

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    Conditioning { jitter: f64 },

    #[error("all {starts} optimizer starts failed")]
    FitFailed { starts: usize },

    #[error("zero spread: all {0} values are identical")]
    ZeroSpread(usize),

    #[error("infeasible settings: {reason}")]
    Infeasible {
        reason: String,
        /// Smallest confidence parameter that makes the problem feasible, if one exists.
        minimal_delta: Option<f64>,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

pub type Result<T, E = UqError> = std::result::Result<T, E>;

impl UqError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            UqError::Io { .. } => "io",
            UqError::Parse { .. } => "parse",
            UqError::Format { .. } => "format",
            UqError::InvalidData(_) => "invalid-data",
            UqError::InsufficientData { .. } => "insufficient-data",
            UqError::Domain(_) => "domain",
            UqError::DimensionMismatch { .. } => "dimension-mismatch",
            UqError::InvalidCovariance(_) => "invalid-covariance",
            UqError::RankDeficient(_) => "rank-deficient",
            UqError::Conditioning { .. } => "conditioning",
            UqError::FitFailed { .. } => "fit-failed",
            UqError::ZeroSpread(_) => "zero-spread",
            UqError::Infeasible { .. } => "infeasible",
            UqError::Config(_) => "config",
        }
    }

    /// File the error refers to, if any.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            UqError::Io { path, .. } | UqError::Parse { path, .. } | UqError::Format { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }
}
