use std::path::PathBuf;

use abplab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }
}

/// Bad parameters surface as config errors; everything else the core
/// raises is a numerical failure.
impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::NotIntegrable(_) => RunError::Config(e.to_string()),
            other => RunError::Numerical(other),
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;
