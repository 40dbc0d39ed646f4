use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("gram matrix not positive definite after jitter {max_jitter:e}")]
    Factorization { max_jitter: f64 },

    #[error("dataset has {n} points, exceeding the exact-GP cap of {cap}")]
    TooManyPoints { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rollout diverged at step {step}: {reason}")]
    Rollout { step: usize, reason: String },

    #[error("no n <= {limit} satisfies the sample-complexity inequality")]
    Unbounded { limit: u64 },

    #[error("config line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
