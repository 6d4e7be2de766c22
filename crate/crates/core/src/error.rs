use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside the horizon [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("path has no derivative values attached")]
    MissingDerivative,

    #[error("paths are defined on different grids")]
    GridMismatch,

    #[error("fixed-point solver did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("non-finite state on path {path} at t = {time}")]
    NonFiniteState { path: usize, time: f64 },

    #[error("consistency violated at t = {t}: z-score {z}")]
    ConsistencyViolation { t: f64, z: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status: 2 configuration, 3 non-convergence,
    /// 4 verification failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } => 2,
            Error::NonConvergence { .. } => 3,
            Error::ConsistencyViolation { .. } | Error::Verification(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
