use thiserror::Error;

/// Errors raised by the solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Array or grid shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A numerical procedure failed (blow-up, non-convergence, positivity loss).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A computed quantity violates an invariant it must satisfy by construction.
    #[error("consistency check failed: {0}")]
    Consistency(String),
    /// Inputs break a usage contract (e.g. unpaired sample ensembles).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Unknown test id, unknown override key, unparsable config value.
    #[error("configuration error: {0}")]
    Config(String),
    /// Reading or writing files.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Whether the error stems from user-provided configuration rather than the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
