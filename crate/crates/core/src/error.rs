use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row {row}, column `{column}`: code {code} outside 1..={levels}")]
    OutOfRange { row: usize, column: String, code: i64, levels: usize },
    #[error("row {row}, column `{column}`: `{value}` is not an integer code")]
    NotInteger { row: usize, column: String, value: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Schema(_)
            | Error::UnknownColumn(_)
            | Error::OutOfRange { .. }
            | Error::NotInteger { .. }
            | Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Sweep { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::Numerical(_) => false,
        }
    }
}
