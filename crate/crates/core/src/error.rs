use thiserror::Error;

/// Maximum number of probability-mass terms any single summation may visit.
pub const TERM_CAP: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target unachievable: {0}")]
    Unachievable(String),

    #[error("summation would need {needed} terms, above the cap of {cap}")]
    TermCapExceeded { needed: u64, cap: u64 },

    #[error("value {0} does not fit in the integer range")]
    Overflow(f64),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_occurrences(n_required: u64) -> Result<()> {
    if n_required < 3 {
        return Err(invalid(format!("N must be at least 3, got {n_required}")));
    }
    Ok(())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

pub(crate) fn check_factor(name: &str, mu: f64) -> Result<()> {
    // +inf is allowed: it denotes an unbounded side of the interval.
    if mu.is_nan() || mu <= 1.0 {
        return Err(invalid(format!("{name} must be greater than 1, got {mu}")));
    }
    Ok(())
}
