use std::process::ExitCode;

use epochsim_core::sim::SimError;
use thiserror::Error;

/// Failure classes with stable process exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("oracle error {error:e} exceeds tolerance {tolerance:e} at {location}")]
    Tolerance { error: f64, tolerance: f64, location: String },
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance { .. } => 3,
            CliError::Capacity(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> ExitCode {
        ExitCode::from(e.exit_code())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        if e.is_capacity() {
            CliError::Capacity(e.to_string())
        } else {
            CliError::Other(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
