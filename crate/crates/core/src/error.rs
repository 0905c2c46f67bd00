use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
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

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-monotone timestamps: {previous:?} followed by {next:?} at line {line}")]
    NonMonotoneTimestamps {
        line: usize,
        previous: String,
        next: String,
    },

    #[error("non-positive price {value} at line {line}, column {column:?}")]
    NonPositivePrice {
        line: usize,
        column: String,
        value: f64,
    },

    #[error("zero variance in series {0:?}")]
    ZeroVariance(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("lag {lag} exceeds the maximum {max} for series of length {len}")]
    LagTooLarge { lag: usize, max: usize, len: usize },

    #[error("non-stationary parameters: persistence {0} >= 1")]
    NonStationary(f64),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
