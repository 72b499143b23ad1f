use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("every sample has zero norm; the bounding radius would be zero")]
    AllZeroNorms,

    #[error("cannot draw a subsample from an empty pool")]
    EmptyPool,

    #[error("pooled standard deviation is zero while the means differ")]
    ZeroVariance,

    #[error("density `{which}` integrates to {mass} on the grid, not 1")]
    NotNormalized { which: &'static str, mass: f64 },

    #[error("bad synthetic spec: {0}")]
    BadSpec(String),

    #[error("{name} = {value} is outside {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("bad magic in matrix file (expected \"OIDM\")")]
    BadMagic,

    #[error("unsupported summary schema version {found} (this build reads version {supported})")]
    SchemaVersionMismatch { found: u64, supported: u32 },

    #[error("invalid summary document: {0}")]
    InvalidSummary(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error families, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Parse,
    Dimension,
    Schema,
    Range,
    Data,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Parse { .. } | Error::RaggedRows { .. } | Error::BadMagic | Error::NonFinite { .. } => {
                ErrorClass::Parse
            }
            Error::DimensionMismatch { .. } => ErrorClass::Dimension,
            Error::SchemaVersionMismatch { .. } | Error::InvalidSummary(_) => ErrorClass::Schema,
            Error::Range { .. } | Error::BadSpec(_) => ErrorClass::Range,
            Error::EmptyInput(_)
            | Error::AllZeroNorms
            | Error::EmptyPool
            | Error::ZeroVariance
            | Error::NotNormalized { .. } => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn range(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::Range { name, value, range }
    }
}
