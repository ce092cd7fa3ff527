use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: field `{field}` = {value} is outside [0, 1]")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },

    #[error("line {line}: window has no frames")]
    EmptyWindow { line: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset carries no labels")]
    Unlabeled,

    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),

    #[error("only one class present ({0}); at least two are required")]
    SingleClass(u8),

    #[error("window {sequence_index} has {frames} frame(s); at least 2 are required")]
    TooFewFrames { sequence_index: usize, frames: usize },

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("expected {expected} feature column(s), found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("classifier family `{0}` exposes no per-feature weights")]
    NoLinearWeights(&'static str),

    #[error("no windows remain after validity filtering at p = {p}")]
    EmptyAfterFilter { p: f64 },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through fold and stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
