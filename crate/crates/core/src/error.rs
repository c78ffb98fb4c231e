use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at x = {x}")]
    Pole { x: f64 },

    #[error("result overflows f64 at x = {x}")]
    Overflow { x: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite integrand value at abscissa {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error(
        "quadrature for {quantity} did not converge: value {value:e}, \
         error estimate {error_estimate:e} after {evaluations} evaluations"
    )]
    NotConverged {
        quantity: &'static str,
        value: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
