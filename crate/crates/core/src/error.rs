use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the echo-cancellation engine and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context} at block {block}")]
    Numeric { context: &'static str, block: usize },

    #[error("{0} is undefined for a silent reference signal")]
    Undefined(&'static str),

    #[error("no blocks were processed")]
    EmptyReport,

    #[error("unsupported audio format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("malformed weights file: {0}")]
    Weights(String),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
