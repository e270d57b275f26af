//! CLI error wrapper mapping every failure onto the documented exit codes:
//! 1 for configuration problems, 2 for data problems, 3 for numeric failures.

use funreg_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }
}

impl From<funreg_core::Error> for CliError {
    fn from(err: funreg_core::Error) -> Self {
        let message = err.to_string();
        match err.class() {
            ErrorClass::Config => CliError::Config(message),
            ErrorClass::Data => CliError::Data(message),
            ErrorClass::Numeric => CliError::Numeric(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}
