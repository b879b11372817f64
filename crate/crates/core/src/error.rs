use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding must be non-empty with finite entries")]
    InvalidEmbedding,

    #[error("embedding has zero norm")]
    ZeroEmbedding,

    #[error("averaged embedding cancels out (norm {norm:e})")]
    DegenerateMean { norm: f64 },

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid task distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid task set: {0}")]
    InvalidTaskSet(String),

    #[error("no positive relevance among retained tasks")]
    NoPositiveRelevance,

    #[error("primitive {id}: {source}")]
    Primitive { id: u64, source: Box<Error> },

    #[error("duplicate primitive id {0}")]
    DuplicateId(u64),

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("no task distribution for primitive {0}")]
    MissingRelevance(u64),

    #[error("clusters share member {0}")]
    OverlappingClusters(u64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("place {0} has no visible images")]
    NoVisibleImages(u64),

    #[error("place {place} references unknown image {image}")]
    UnknownImage { place: u64, image: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn schema(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
