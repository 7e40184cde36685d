use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: count must be a positive integer, got {value:?}")]
    InvalidCount { line: usize, value: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown object id {0}")]
    UnknownObject(u32),

    #[error("unknown context id {0}")]
    UnknownContext(u32),

    #[error("unknown word {0:?}")]
    UnknownWord(String),

    #[error("object {0} has zero marginal count")]
    ZeroMarginal(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "degenerate redistribution for object {object}: leftover mass {leftover} but \
         redistribution model leaves {unseen_mass} for unseen contexts"
    )]
    DegenerateRedistribution {
        object: u32,
        leftover: f64,
        unseen_mass: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("non-finite distortion between object {object} and centroid {centroid}")]
    NonFiniteDistortion { object: usize, centroid: usize },

    #[error("corrupt state: {0}")]
    CorruptState(String),

    #[error("empty test set")]
    EmptyTestSet,

    #[error("context {0} does not belong to any pseudo-word")]
    NotInPseudoword(u32),

    #[error("invalid confusion set: {0}")]
    InvalidConfusionSet(String),

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
