use std::path::PathBuf;

/// Errors surfaced by the harness and CLI.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(#[source] edmc_core::Error),
    #[error("solver failed: {0}")]
    Solver(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    /// Process exit code: 1 for solver failures, 2 for anything wrong with
    /// the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Solver(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        AppError::Csv { path: path.into(), source }
    }
}

impl From<edmc_core::Error> for AppError {
    fn from(e: edmc_core::Error) -> Self {
        AppError::Input(e)
    }
}
