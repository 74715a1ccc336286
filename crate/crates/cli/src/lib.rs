//! Library surface of the `lpcoreset` command-line tool: configuration
//! handling and the command implementations, exposed for integration tests
//! and the experiment harness.

pub mod commands;
pub mod config;

use thiserror::Error;

/// CLI failures, split by exit code: usage errors exit 2, numerical or
/// runtime failures exit 3, failed checks exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] lpcoreset_core::Error),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}
