use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("mapping error at row {row}: column `{column}` has unmapped category `{value}`")]
    Mapping {
        row: u64,
        column: String,
        value: String,
    },

    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),

    #[error("incomplete features: case `{case_id}` has no `{modality}` row")]
    IncompleteFeatures { case_id: String, modality: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error in {source_name} at line {line}: {message}")]
    Format {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("isolated node `{0}` has no outgoing edges")]
    IsolatedNode(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numerical failure on case `{case_id}`: {message}")]
    Numerical { case_id: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration and input-contract problems,
    /// 1 for runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. }
            | Error::Mapping { .. }
            | Error::DuplicateCase(_)
            | Error::IncompleteFeatures { .. }
            | Error::Dimension(_)
            | Error::Format { .. }
            | Error::Config(_)
            | Error::Usage(_)
            | Error::Checkpoint(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::InsufficientData(_)
            | Error::IsolatedNode(_)
            | Error::UndefinedMetric(_)
            | Error::Numerical { .. }
            | Error::Io { .. } => 1,
        }
    }
}
