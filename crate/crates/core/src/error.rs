//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("degenerate triangle: the user coincides with a satellite")]
    DegenerateTriangle,

    #[error("no serving satellite covers user {0}")]
    NoServingSatellite(usize),

    #[error("no serving base station for user {0}")]
    NoServingBs(usize),

    #[error("analytic path requires an integer Nakagami m, got {0}")]
    NonIntegerM(f64),

    #[error("composition enumeration needs {terms} terms, budget is {budget}")]
    CombinatorialLimit { terms: u64, budget: u64 },

    #[error("outage query is not supported by this evaluator: {0}")]
    UnsupportedQuery(String),

    #[error("insufficient history: need at least {needed} samples, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
