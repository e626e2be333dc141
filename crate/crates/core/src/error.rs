use alloc::string::String;

/// Failures raised by the numerical kernels.
///
/// Soft conditions (an orthant estimate that misses its accuracy target, a
/// truncated-normal sampler with a poor acceptance rate) are reported as
/// flags on the returned values instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("truncation region has numerically zero probability")]
    InfeasibleRegion,
    #[error("linear map is rank deficient")]
    RankDeficient,
    #[error("conditional latent covariance is degenerate")]
    DegenerateConditional,
    #[error("model set is empty")]
    EmptyModelSet,
    #[error("invalid SUN parameters: {0}")]
    InvalidParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
