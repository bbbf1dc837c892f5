//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MemlError>;

#[derive(Debug, Error)]
pub enum MemlError {
    /// A vector or matrix had the wrong dimension for the state it was
    /// combined with. Always a caller bug, never a runtime condition.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// A policy was asked to pick from an empty action set.
    #[error("empty action set at round {round}")]
    EmptyActionSet { round: usize },

    /// Bias construction requires at least one completed task per labeled
    /// environment.
    #[error("insufficient training tasks: environment {environment} has no records")]
    InsufficientTrainingTasks { environment: usize },

    /// A scenario configuration failed validation. `path` is the offending
    /// key (dotted), so callers can point at the exact line of the file.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MemlError {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        MemlError::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        MemlError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: configuration problems exit 2,
    /// everything else 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            MemlError::Config { .. } | MemlError::InvalidParameter { .. } => 2,
            _ => 3,
        }
    }
}
