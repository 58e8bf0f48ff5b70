//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Vector or matrix shapes do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A point lies outside a benchmark's input box.
    #[error("domain error: {0}")]
    Domain(String),

    /// Linear algebra or likelihood evaluation failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A metric is undefined for the given data (e.g. zero test variance).
    #[error("metric error: {0}")]
    Metric(String),

    /// Experiment configuration is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// CSV or checkpoint content could not be parsed.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
