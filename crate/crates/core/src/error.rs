use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("constraint violated: {condition}")]
    ConstraintViolation { condition: String },

    #[error("non-finite value in {0}")]
    NumericDomain(&'static str),

    #[error("invalid agent count {n}: at least 2 agents are required")]
    InvalidSize { n: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid signal `{field}`: {reason}")]
    InvalidSignal { field: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("statistics undefined: every run was not-reached")]
    UndefinedStats,

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
