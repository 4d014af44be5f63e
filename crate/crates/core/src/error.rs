// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module.
//!
//! Each variant maps to one [`ErrorKind`], which the command-line front end
//! turns into a stable exit code and a machine-parsable message prefix.

use std::path::PathBuf;

/// Coarse error category used for exit codes and error prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or an invariant violated by user data.
    Validation,
    /// Archive structure or contents disagree with their manifest.
    Integrity,
    /// Training produced a non-finite loss.
    Divergence,
    /// Bad configuration, refused request, or I/O failure.
    Other,
}

impl ErrorKind {
    /// Process exit code for this category.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Integrity => 3,
            ErrorKind::Divergence => 4,
            ErrorKind::Other => 1,
        }
    }

    /// Short tag printed as `error[<tag>]: ...`.
    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Integrity => "integrity",
            ErrorKind::Divergence => "divergence",
            ErrorKind::Other => "error",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PaccsError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset invariant `{invariant}` violated: {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("archive structure: {0}")]
    Structural(String),

    #[error("archive integrity: {0}")]
    Integrity(String),

    #[error("non-finite value in layer {layer}, variant {variant}")]
    NonFinite { layer: usize, variant: String },

    #[error("dataset fingerprint mismatch: archive {archive}, dataset {dataset}")]
    FingerprintMismatch { archive: String, dataset: String },

    #[error("training diverged in run {run} at epoch {epoch}")]
    Divergence { run: usize, epoch: usize },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PaccsError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PaccsError::Parse { .. } | PaccsError::Validation { .. } | PaccsError::Domain(_) => {
                ErrorKind::Validation
            }
            PaccsError::Structural(_)
            | PaccsError::Integrity(_)
            | PaccsError::NonFinite { .. }
            | PaccsError::FingerprintMismatch { .. } => ErrorKind::Integrity,
            PaccsError::Divergence { .. } => ErrorKind::Divergence,
            PaccsError::Config(_) | PaccsError::Io { .. } | PaccsError::Json(_) | PaccsError::Csv(_) => {
                ErrorKind::Other
            }
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        PaccsError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PaccsError>;
