use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A node or radius outside the region where an operator is defined.
    Domain(String),
    /// Malformed parameters or inputs that violate a documented precondition.
    InvalidInput(String),
    /// The weight has `int_0^inf Phi^{-1/m} = inf`, so the uniform bound does not apply.
    NotIntegrable(String),
    /// A NaN or infinity showed up where a finite value is required.
    NonFinite(String),
    /// An iterative solve did not reach its tolerance.
    Convergence { context: String, residual: f64 },
    /// Input data failed a verification step (differential inequality, positivity, mass cap).
    Rejected(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NotIntegrable(msg) => write!(f, "weight not integrable: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Convergence { context, residual } => {
                write!(f, "no convergence in {context} (last residual {residual:e})")
            }
            Error::Rejected(msg) => write!(f, "input rejected: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
