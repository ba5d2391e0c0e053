use std::process::ExitCode;

use adaptta::backend::trace::TraceError;
use adaptta::engine::EngineError;
use adaptta::harness::HarnessError;
use thiserror::Error;

/// Failure classes, each with its own exit status so scripted sweeps can
/// tell a bad invocation from bad data from a bug.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags, config values or option combinations.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed traces, manifests and images.
    #[error("{0}")]
    Data(String),
    /// Anything else, including failures writing the output.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Internal(_) => 3,
        })
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match &e {
            HarnessError::EmptySweep | HarnessError::Config(EngineError::InvalidThreshold(_)) => {
                Self::Usage(e.to_string())
            }
            _ if e.is_data_error() => Self::Data(e.to_string()),
            _ => Self::Internal(e.to_string()),
        }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        Self::Data(e.to_string())
    }
}
