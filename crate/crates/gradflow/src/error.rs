use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, each tied to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration, bad usage. Exit 2.
    #[error("config error: {0}")]
    Config(String),
    /// A modelling hypothesis does not hold. Exit 1.
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    /// The inner solver gave up. Exit 3.
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hypothesis(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<gradflow_core::Error> for CliError {
    fn from(e: gradflow_core::Error) -> Self {
        match e {
            gradflow_core::Error::StepFailed { .. } | gradflow_core::Error::NoConvergence { .. } => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
