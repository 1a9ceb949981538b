//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {location}: {reason}")]
    MalformedRecord { location: String, reason: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),

    #[error("invalid fold plan: {0}")]
    InvalidFolds(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("no precomputed vector for document {0:?}")]
    MissingVector(String),

    #[error("transport error talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },

    #[error("backend contract violation: {0}")]
    ContractViolation(String),

    #[error("corpus too small: {docs} document(s), min_topic_size is {min_topic_size}")]
    CorpusTooSmall { docs: usize, min_topic_size: usize },

    #[error("no cluster reached min_topic_size ({0})")]
    NoTopics(usize),

    #[error("empty vocabulary after tokenization and stopword removal")]
    EmptyVocabulary,

    #[error("invalid hypothesis template {pattern:?}: {reason}")]
    InvalidTemplate { pattern: String, reason: String },

    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),

    #[error("unsupported artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
