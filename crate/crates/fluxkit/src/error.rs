//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter violates its domain (sign, range, finiteness).
    #[error("domain error in `{field}`: {message}")]
    Domain { field: &'static str, message: String },

    /// Requested more levels than the basis truncation can support.
    #[error("truncation too small: {0}")]
    Truncation(String),

    /// An iterative computation failed to converge.
    #[error("convergence failure in {what}: {details}")]
    Convergence { what: &'static str, details: String },

    /// Phase-grid window does not cover the wavefunction support.
    #[error("phase window too small: {0}")]
    Window(String),

    /// Signal-to-noise too low for state discrimination.
    #[error("insufficient SNR: {0}")]
    Snr(String),

    /// Not enough data points for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed input data (CSV/JSON contents, inconsistent series).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration (CLI arguments, config files, parameter files).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn domain(field: &'static str, message: impl Into<String>) -> Self {
        Error::Domain { field, message: message.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
