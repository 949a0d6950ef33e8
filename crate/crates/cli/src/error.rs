use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("integration failed: {message}")]
    Integration {
        message: String,
        /// Where the partial trajectory was written, if anything was accepted.
        partial: Option<PathBuf>,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Core(#[from] moneyflow_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Integration { .. } => 3,
            CliError::Invariant(_) => 4,
            CliError::Core(moneyflow_core::Error::InvalidParams(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
