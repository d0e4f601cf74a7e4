use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration, schema mapping or flag combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be used (no transactions, malformed file, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A single line of a transaction file could not be parsed.
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },

    /// Argument outside its allowed range.
    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    /// Shape mismatch between inputs that must agree.
    #[error("length mismatch: {0}")]
    Shape(String),

    /// A stage failed; carries the stage name and dataset for context.
    #[error("stage `{stage}` failed on dataset `{dataset}`: {source}")]
    Stage {
        stage: &'static str,
        dataset: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(self, stage: &'static str, dataset: &str) -> Self {
        Error::Stage { stage, dataset: dataset.to_string(), source: Box::new(self) }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Line { .. } | Error::Csv(_) | Error::Io { .. } => 2,
            Error::Range { .. } | Error::Shape(_) => 1,
            Error::Json(_) => 2,
            Error::Internal(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
