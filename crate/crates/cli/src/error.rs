//! Error taxonomy for the harness.
//!
//! Configuration problems and runtime failures are kept apart so `main` can
//! translate them into the documented exit codes: 2 for anything the user
//! can fix by editing the scenario file or the command line, 3 for failures
//! while computing or writing results.

use std::path::PathBuf;

use nvsim_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The scenario file or CLI arguments are unusable. The message lists
    /// every offending key, not just the first one found.
    #[error("invalid configuration:\n{0}")]
    Validation(String),
    /// A pipeline failed after validation passed: numerical breakdown,
    /// an infeasible derived quantity, a fit that cannot be set up.
    #[error("run failed: {0}")]
    Runtime(String),
    /// Filesystem trouble, always with the path that caused it.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 0 is success (never an error), 2 a validation
    /// error, 3 a runtime or I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }

    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    /// Core errors surface after validation, so they count as runtime
    /// failures; configurations that would trip them should have been
    /// rejected up front.
    fn from(e: CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
