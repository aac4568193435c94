use alloc::string::String;

use thiserror::Error;

/// Errors produced by the analysis kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A run-history invariant does not hold. `context` names the offending
    /// candidate, hyperparameter or node.
    #[error("validation error at {context}: {message}")]
    Validation { context: String, message: String },

    #[error("{kind} `{name}` not found")]
    NotFound { kind: &'static str, name: String },

    /// Caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("cannot merge search spaces at `{name}`: {message}")]
    MergeConflict { name: String, message: String },

    #[error("unsupported primitive(s): {0}")]
    UnsupportedPrimitive(String),

    #[error("fit failed for `{candidate}`: {message}")]
    FitFailed { candidate: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("oracle failure: {0}")]
    Oracle(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn validation(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        context: context.into(),
        message: message.into(),
    }
}

pub(crate) fn not_found(kind: &'static str, name: impl Into<String>) -> Error {
    Error::NotFound {
        kind,
        name: name.into(),
    }
}
