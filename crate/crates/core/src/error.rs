use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: instance '{id}' has {found} features, expected {expected}")]
    DimensionMismatch {
        line: usize,
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: instance '{id}' has a non-finite feature at position {index}")]
    NonFiniteFeature {
        line: usize,
        id: String,
        index: usize,
    },

    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },

    #[error("line {line}: group '{group}' references unknown instance '{member}'")]
    UnresolvedMember {
        line: usize,
        group: String,
        member: String,
    },

    #[error("line {line}: group '{group}' has score {score} outside [0, 1]")]
    ScoreOutOfRange {
        line: usize,
        group: String,
        score: f64,
    },

    #[error("line {line}: group '{group}' has no members")]
    EmptyGroup { line: usize, group: String },

    #[error("{0}")]
    Validation(#[from] crate::dataset::ValidationReport),

    #[error("group selection is empty")]
    EmptySelection,

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("knn k={k} must satisfy 1 <= k < {scope}")]
    KnnTooLarge { k: usize, scope: usize },

    #[error("graph cache is stale: expected dataset hash {expected}, found {found}")]
    StaleGraphCache { expected: String, found: String },

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("non-finite {what} at iteration {iteration} (epoch {epoch}, batch {batch})")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        epoch: usize,
        batch: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown group '{0}'")]
    UnknownGroup(String),

    #[error("unknown instance '{0}'")]
    UnknownInstance(String),

    #[error("instance '{0}' has no ground-truth label")]
    MissingLabel(String),

    #[error("group '{group}' has non-binary score {score}")]
    NonBinaryScore { group: String, score: f64 },

    #[error("evaluation set is empty")]
    EmptyEvaluation,

    #[error("oracle size guard exceeded: {0} instances (limit {limit})", limit = crate::synth::ORACLE_MAX_INSTANCES)]
    OracleTooLarge(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
