use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] chemotaxis_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: column `{column}`: {message}")]
    Schema {
        path: String,
        column: String,
        message: String,
    },
    #[error("solver aborted: {0}")]
    Solver(String),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<Path>, err: csv::Error) -> Self {
        let path = path.as_ref();
        match err.into_kind() {
            csv::ErrorKind::Io(e) => HarnessError::io(path, e),
            other => HarnessError::Schema {
                path: path.display().to_string(),
                column: String::new(),
                message: format!("{other:?}"),
            },
        }
    }

    /// Process exit status: 1 for invalid input, 2 for I/O failures, 3 for solver aborts.
    pub fn exit_code(&self) -> i32 {
        use chemotaxis_core::Error as E;
        match self {
            HarnessError::Io { .. } => 2,
            HarnessError::Solver(_) => 3,
            HarnessError::Core(E::NoConvergence { .. } | E::Negative { .. } | E::NonFinite { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
