use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical scheme ran out of terms or levels before meeting its tolerance.
    #[error("accuracy not reached: {0}")]
    Accuracy(String),

    /// Requested discretization exceeds a hard size cap.
    #[error("size error: {0}")]
    Size(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// CG met a direction of nonpositive curvature; the configuration is not observable.
    #[error("operator is not positive definite: curvature {curvature:.3e} along a direction of {} potentials", direction.len())]
    NotPositiveDefinite { curvature: f64, direction: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::Accuracy(_)
            | Error::Size(_)
            | Error::NotPositiveDefinite { .. } => 3,
            Error::NonConvergence { .. } => 4,
        }
    }
}
