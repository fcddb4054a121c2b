use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("value {value} at index {index} must be positive")]
    NonPositive { index: usize, value: f64 },

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("design matrix is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("singular system in {context} (condition estimate {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("all RANSAC iterations drew degenerate samples")]
    DegenerateRansac,

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }
}
