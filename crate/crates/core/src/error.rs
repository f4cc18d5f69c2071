use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("malformed array shape: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("quadratic form is not positive definite (smallest pivot {0:e})")]
    NotPositiveDefinite(f64),

    #[error("unknown catalogue system `{0}`")]
    UnknownSystem(String),

    #[error("catalogue system `{name}` takes {expected} parameter(s), got {found}")]
    ParamCount {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("incompatible characteristic data: {0}")]
    IncompatibleData(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
