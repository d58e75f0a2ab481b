use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 config, 2 I/O, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Io { .. } => 2,
            HarnessError::Internal(_) => 3,
        }
    }
}

impl From<chunkgen_core::Error> for HarnessError {
    fn from(e: chunkgen_core::Error) -> Self {
        match e {
            chunkgen_core::Error::InvalidConfig(m) => HarnessError::Config(m),
            other => HarnessError::Internal(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
