use thiserror::Error;

use crate::domain::GrammageClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown grammage class {0}")]
    UnknownClass(GrammageClass),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("class {0} has no instances")]
    EmptyClass(GrammageClass),

    #[error("model file: {0}")]
    Model(String),

    #[error("unsupported schema version {0}")]
    SchemaVersion(u64),

    #[error("model file is truncated")]
    Truncated,

    #[error("class list mismatch: {0}")]
    ClassMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
