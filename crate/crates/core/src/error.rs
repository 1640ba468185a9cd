use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid band selection: {0}")]
    InvalidSelection(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("degenerate pixel: {0}")]
    DegeneratePixel(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("quadratic program did not converge: {0}")]
    QpFailure(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidSelection(_) => "invalid_selection",
            Error::Domain(_) => "domain_error",
            Error::DegenerateConfiguration(_) => "degenerate_configuration",
            Error::DegeneratePixel(_) => "degenerate_pixel",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::QpFailure(_) => "qp_failure",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
