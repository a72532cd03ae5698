use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{value} lies outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("{0} is not supported")]
    Unsupported(&'static str),

    #[error("family has neither a sampler nor an analytic expectation")]
    SamplerUnavailable,

    #[error("step parameter must be positive and finite, got {0}")]
    BadStep(f64),

    #[error("rejection sampler cannot be certified: {0}")]
    RejectionInfeasible(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("probe direction must have unit norm, got norm {0}")]
    NonUnitProbe(f64),

    #[error("test function `{0}` has a vanishing Dirichlet energy")]
    DegenerateDenominator(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("analytic law unavailable: {0}")]
    Unavailable(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("csv output failed: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
