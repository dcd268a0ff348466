use thiserror::Error;

use lsppair_core::{EngineError, MetricsError};

/// Failures surfaced by the command-line driver, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Bracketing(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
            CliError::Bracketing(_) => 4,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidScenario(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NotBracketed { .. } => CliError::Bracketing(e.to_string()),
            MetricsError::Engine(inner) => inner.into(),
            MetricsError::BadBounds { .. } | MetricsError::BadScale(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
