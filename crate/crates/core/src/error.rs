//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

use thiserror::Error;

/// All failure modes of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("config file not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("{0}")]
    Data(String),

    #[error("no valid rows in {0}")]
    NoValidRows(PathBuf),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("year {0} outside supported range 1900..=2100")]
    YearOutOfRange(i32),

    #[error("vocabulary empty after min-count filtering (min_count={0})")]
    EmptyVocabulary(u32),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("token not in vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("document {0:?} has no in-vocabulary tokens")]
    NoVocabOverlap(String),

    #[error("non-finite training loss at epoch {0}")]
    Divergence(usize),

    #[error("stratum {label:?} has {docs} documents, below the minimum of {min}")]
    StratumTooSmall {
        label: String,
        docs: usize,
        min: usize,
    },

    #[error("target_dim {target} exceeds min(dim={dim}, docs={docs})")]
    TargetDimTooLarge {
        target: usize,
        dim: usize,
        docs: usize,
    },

    #[error("input has zero variance; nothing to project")]
    DegenerateInput,

    #[error("k={k} exceeds number of documents {docs}")]
    TooManyClusters { k: usize, docs: usize },

    #[error("no non-outlier topic in the assignment")]
    NoTopics,

    #[error("class {0} is empty after stopword removal")]
    EmptyClass(i32),

    #[error("attribute set {0:?} has no in-vocabulary words")]
    EmptyAttributeSet(String),

    #[error("only {0} target words present; need at least 2")]
    TooFewTargetWords(usize),

    #[error("degenerate variance: all per-word associations are identical")]
    DegenerateVariance,

    #[error("permutation test needs iterations >= 1")]
    ZeroIterations,

    #[error("invalid word set {name:?}: {reason}")]
    InvalidWordSet { name: String, reason: String },

    #[error("malformed {what} file {path}: {reason}")]
    MalformedFile {
        what: &'static str,
        path: PathBuf,
        reason: String,
    },
}

impl Error {
    /// Process exit code: 1 usage, 2 data/validation, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigNotFound(_) => 1,
            Error::Divergence(_)
            | Error::DegenerateVariance
            | Error::DegenerateInput
            | Error::StratumTooSmall { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
