use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the emulation library and the CLI harness.
#[derive(Debug, Error)]
pub enum EmuError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmuError>;

impl EmuError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        EmuError::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        EmuError::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        EmuError::Domain(msg.into())
    }
}
