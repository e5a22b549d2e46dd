use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    /// Phase data failed the 1D-manifold gate (leading variance fraction below 0.999).
    #[error("phase data is not a 1D manifold (leading variance fraction {fraction:.6})")]
    NotOneDimensional { fraction: f64 },

    #[error("density clustering produced no clusters: {0}")]
    NoClusters(String),

    #[error("unknown chassis id {0:?}")]
    UnknownChassis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
