//! Crate-wide error type.

/// Errors produced by the simulation, encoding, training, and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain (state out of range,
    /// voltage on the wrong side of a threshold, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is internally inconsistent or out of supported range.
    #[error("config error: {0}")]
    Config(String),

    /// A file did not match its expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// Two inputs that must agree (counts, shapes) do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }
}
