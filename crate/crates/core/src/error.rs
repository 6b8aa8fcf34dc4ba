use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate sample: both sample variances are zero")]
    DegenerateSample,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "sample-size bound B = {bound} is too small: {censored} of {total} points never \
         enter the rejection region, so the {target} quantile is not identified"
    )]
    BoundTooSmall {
        bound: f64,
        censored: usize,
        total: usize,
        target: f64,
    },

    #[error("infeasible design: {0}")]
    Infeasible(String),
}
