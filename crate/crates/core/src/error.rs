use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("parse error at row {row}, column {col}: cannot read {value:?} as a number")]
    Parse { row: usize, col: usize, value: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("optimizer did not converge (duality gap {gap:e})")]
    NoConvergence { gap: f64 },

    #[error("out-of-sample evaluation is not available for {0} kernels")]
    NoOutOfSample(&'static str),

    #[error("class tags missing for {0} rows")]
    MissingTags(usize),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Format {
                line,
                message: format!("ragged row: expected {expected_len} cells, found {len}"),
            },
            other => Error::Format {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}
