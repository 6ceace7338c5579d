//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, MatanError>;

#[derive(Debug, thiserror::Error)]
pub enum MatanError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("graph has no edges: {0}")]
    EmptyGraph(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl MatanError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MatanError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        MatanError::Parse { path: path.into(), line, msg: msg.into() }
    }
}
