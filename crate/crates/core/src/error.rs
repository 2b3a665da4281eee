use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameter or argument outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A joint law could not be constructed (e.g. covariance not PSD).
    #[error("model error: {0}")]
    Model(String),
    /// The model cannot answer the request analytically; the caller must
    /// fall back to an empirical route.
    #[error("capability error: {0}")]
    Capability(String),
    /// A Monte Carlo estimate could not be formed.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// The request was refused because the estimate would be unreliable.
    #[error("refused: {0}")]
    Refused(String),
    /// Numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
