use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("integration failure at t = {t}, node {node}: non-finite value")]
    IntegrationFailure { t: f64, node: usize },

    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("local existence failure: blow-up at t = {t} before the unit interval closed")]
    LocalExistenceFailure { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
