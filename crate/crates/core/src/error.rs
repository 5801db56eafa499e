use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("unknown behavior '{token}' at line {line}")]
    UnknownBehavior { token: String, line: usize },
    #[error("duplicate {field} '{id}'")]
    Duplicate { field: &'static str, id: String },
    #[error("dangling reference to {kind} '{id}'")]
    Dangling { kind: &'static str, id: String },
    #[error("degenerate ego graph for user '{0}'")]
    DegenerateEgo(String),
    #[error("graph has {0} vertices; exact coritivity is limited to 20, use the MMAS approximation")]
    TooLargeForExact(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("config key '{key}': {msg}")]
    Config { key: String, msg: String },
    #[error("missing artifact {path} (run the `{stage}` stage first)")]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("coverage gap: {0}")]
    Coverage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
