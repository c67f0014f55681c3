use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution parameter lies outside its domain (e.g. sigma <= 0).
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    /// An argument lies outside the domain of the operation (e.g. p not in (0,1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulation design that cannot produce a usable session.
    #[error("design error: {0}")]
    Design(String),

    /// Input data does not satisfy an operation's precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A point estimator is undefined for the supplied data.
    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// A ratio whose denominator vanished numerically.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
