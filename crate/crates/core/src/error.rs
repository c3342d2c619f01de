use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label map of `{0}` has no labeled pixels")]
    Unlabeled(String),
    #[error("inconsistent vocabulary: {0}")]
    InconsistentVocabulary(String),
    #[error("no decodable labels: {0}")]
    NoLabels(String),
    #[error("missing embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("unsupported format `{found}`, expected `{expected}`")]
    Format { expected: &'static str, found: String },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }
}
