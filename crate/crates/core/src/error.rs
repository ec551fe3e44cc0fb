use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum TrawlError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("divergent configuration: {0}")]
    Divergent(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("tolerance unattainable: {0}")]
    Unattainable(String),
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TrawlError {
    /// True for errors caused by the caller's configuration rather than by a failed computation.
    pub fn is_config_error(&self) -> bool {
        !matches!(self, TrawlError::Io(_))
    }
}

pub type Result<T, E = TrawlError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(TrawlError::Domain(msg.into()))
}
