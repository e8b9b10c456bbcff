use std::process::ExitCode;

use thiserror::Error;

/// A failed command. The variant decides the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration: exit 2.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data: exit 3.
    #[error("{0}")]
    Data(String),
    /// Anything else: exit 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(3),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
