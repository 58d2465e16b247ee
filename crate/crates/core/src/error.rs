use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Training state captured when a meta-iteration aborts on a non-finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub cause: String,
}

/// Errors produced by the meta-learning lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value {value} during {phase}")]
    NonFinite { phase: String, value: f64 },

    #[error("numeric abort at iteration {}: {}", .0.iteration, .0.cause)]
    NumericAbort(Box<Snapshot>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("task buffer must be cleared before storing a new iteration")]
    BufferNotCleared,

    #[error("cannot select {requested} tasks from a buffer of {available}")]
    BufferTooSmall { requested: usize, available: usize },

    #[error("episode already finished after {horizon} steps")]
    EpisodeDone { horizon: usize },

    #[error("unsupported task family {family} for {operation}")]
    UnsupportedFamily {
        family: String,
        operation: &'static str,
    },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn non_finite(phase: impl Into<String>, value: f64) -> Self {
        Error::NonFinite {
            phase: phase.into(),
            value,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
