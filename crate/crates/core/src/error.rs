use thiserror::Error;

/// Errors raised across the simulation and recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge within {iterations} iterations (dimension {dimension})")]
    EigenNonConvergence { iterations: usize, dimension: usize },

    #[error("group index {index} out of range ({count} groups)")]
    GroupOutOfRange { index: usize, count: usize },

    #[error(
        "laplace tail bound violated at s = {s}: horizon {horizon:.4} too short, need at least {required:.4}"
    )]
    TailBound { s: f64, horizon: f64, required: f64 },

    #[error("ill-conditioned pencil: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("singular probe matrix: {0}")]
    SingularProbes(String),

    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),

    #[error("rejected probe plan: {0}")]
    RejectedPlan(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checksum mismatch for {file}: expected {expected}, found {found}")]
    Checksum {
        file: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
