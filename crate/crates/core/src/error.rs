//! Error taxonomy shared by every operation in the crate.

/// Failure modes of the numerical operations.
///
/// `InvalidArgument` covers precondition violations (mismatched grids,
/// out-of-range parameters, malformed inputs). `NumericFailure` covers
/// iterations that did not converge within their cap and carries the last
/// residual so callers can report how far the solve got.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure in {context}: residual {residual:e} after {iterations} iterations")]
    NumericFailure {
        context: String,
        residual: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn no_converge(context: impl Into<String>, residual: f64, iterations: usize) -> Self {
        Error::NumericFailure {
            context: context.into(),
            residual,
            iterations,
        }
    }
}
