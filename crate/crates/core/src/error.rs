use thiserror::Error;

/// Errors raised by the spline, operator and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point {value} lies outside the interval [{lower}, {upper}]")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },

    #[error("{count} data point(s) outside the domain, first indices: {indices:?}")]
    DataOutsideDomain { count: usize, indices: Vec<usize> },

    #[error("shape mismatch: expected length {expected}, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("dense assembly of dimension {dimension} exceeds the cap of {cap}")]
    Capacity { dimension: usize, cap: usize },

    #[error("non-finite value encountered at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("numeric failure on level {level}: {reason}")]
    Numeric { level: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
