use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported quadrature rule size {0} (expected 1..=256)")]
    UnsupportedRuleSize(usize),

    #[error("invalid interval [{lo}, {hi}]: lower bound must be below upper bound")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("function evaluation failed: non-finite value at {0:?}")]
    EvaluationFailure(Vec<f64>),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("unknown formulation `{0}`")]
    UnknownFormulation(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("optimizer protocol violation: {0}")]
    Protocol(&'static str),

    #[error("covariance decomposition failed: {0}")]
    CovarianceFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
