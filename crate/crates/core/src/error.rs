use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("lanczos did not converge after {iterations} iterations (best residual {best_residual:e})")]
    LanczosNoConvergence { iterations: usize, best_residual: f64 },

    #[error("lanczos produced a non-finite iterate at iteration {iteration}")]
    LanczosNan { iteration: usize },

    #[error(
        "finite-difference step {step:e} underflows relative to |theta| = {theta_norm:e}; rescale the parameters or raise the relative step"
    )]
    FdStepUnderflow { step: f64, theta_norm: f64 },

    #[error("batch size {batch} exceeds the {n} available samples")]
    BatchTooLarge { batch: usize, n: usize },

    #[error(
        "projection onto the stable set did not converge after {iterations} iterations (sharpness residual {sharp_residual:e}, alignment residual {align_residual:e})"
    )]
    ProjectionFailed {
        iterations: usize,
        sharp_residual: f64,
        align_residual: f64,
    },

    #[error("{what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("non-positive values at indices {offenders:?}")]
    NonPositive { offenders: Vec<usize> },

    #[error("index out of range in {context}: {index} (available {len})")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("iterate diverged at step {step}")]
    Diverged { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
