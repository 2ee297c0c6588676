use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain an operation accepts
    /// (ordering `t >= s`, horizon, bracket, alignment, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Transition-matrix propagation failed (non-finite state, step underflow).
    #[error("propagation error at t = {t}: {reason}")]
    Propagation { t: f64, reason: String },

    /// A quadrature sum left the finite range.
    #[error("quadrature overflow at (t, xi) = ({t}, {xi})")]
    QuadratureOverflow { t: f64, xi: f64 },

    /// A constructor received input for which the object is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A special function could not be assembled from its matching conditions.
    #[error("construction error: {0}")]
    Construction(String),

    /// Malformed configuration text.
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown catalog entry `{0}`")]
    UnknownFamily(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
