use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Model or run configuration is inconsistent.
    #[error("config: {0}")]
    Config(String),
    /// A caller-supplied value is invalid; `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    Argument { field: String, reason: String },
    #[error("record {record}: {reason}")]
    Record { record: String, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("io {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn arg(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Argument { field: field.into(), reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable category used by the CLI and the HTTP layer.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Argument { .. } => "argument",
            Error::Record { .. } => "record",
            Error::Checkpoint(_) => "checkpoint",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
