use thiserror::Error;

/// Message raised when argument shapes cannot be reconciled for a vectored call.
pub const SHAPE_MISMATCH: &str = "Array shape or length mismatch";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("index {index:?} out of bounds for shape {dims:?}")]
    Index { index: Vec<usize>, dims: Vec<usize> },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported declaration at line {line}, column {column}: {construct}")]
    UnsupportedDecl {
        line: usize,
        column: usize,
        construct: String,
    },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("rank error: actual rank {actual} is below expected rank {expected}")]
    Rank { actual: usize, expected: usize },

    /// Displays exactly [`SHAPE_MISMATCH`].
    #[error("{}", SHAPE_MISMATCH)]
    Vector,

    #[error("{0}")]
    Usage(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("registration error: {0}")]
    Registration(String),

    #[error("kernel {kernel} failed on iteration {iteration}: {message}")]
    Kernel {
        kernel: String,
        iteration: usize,
        message: String,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
