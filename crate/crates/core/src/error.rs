//! Error types shared across the toolkit.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by models, datasets and experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data is malformed (non-finite values, bad headers, out-of-range ids).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A dataset selection matched nothing.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    /// I/O failure, annotated with the path involved.
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
