use thiserror::Error;

#[derive(Debug, Error)]
pub enum CpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rank {rank} is not supported by this procedure (maximum {max})")]
    UnsupportedRank { rank: usize, max: usize },

    #[error("computation failed: {0}")]
    Computation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown fixture id `{0}`")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CpError>;

impl CpError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CpError::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        CpError::Precondition(msg.into())
    }
}
