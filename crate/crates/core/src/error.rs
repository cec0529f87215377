use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("optimizer state: {0}")]
    State(String),

    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("non-finite value encountered during task {task}")]
    NonFinite { task: usize },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
