use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested size exceeds what the routine supports.
    #[error("size error: {0}")]
    Size(String),

    /// A quadrature or series failed to reach its tolerance.
    #[error("numeric error: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// Invalid user configuration.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn numeric(message: impl Into<String>, residual: f64) -> Self {
        Error::Numeric {
            message: message.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
