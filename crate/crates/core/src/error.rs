use alloc::string::String;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature ran out of subdivisions; the partial estimate is kept.
    #[error("quadrature did not converge: estimate {estimate:e} with error {abs_error:e}")]
    Quadrature { estimate: f64, abs_error: f64 },

    #[error("no exact density for n = {0}; use the density envelope instead")]
    UnsupportedExactMode(u32),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
