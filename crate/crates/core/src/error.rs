use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants fall in two groups: validation failures (bad parameters or
/// geometry) and numerical failures (no convergence, singular systems).
/// [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular parameterization at t = {t}: |gamma'| = {speed:e}")]
    SingularParameterization { t: f64, speed: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("argument outside the domain of {func}: {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("shooting bracket [{lo}, {hi}] does not straddle the ground state")]
    ShootingBracket { lo: f64, hi: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("accuracy check failed: {0}")]
    Accuracy(String),

    #[error("expansion fit residual {residual:e} exceeds {limit:e}")]
    ExpansionMismatch { residual: f64, limit: f64 },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("coincident spikes: gap {gap:e} below {limit:e}")]
    SingularInteraction { gap: f64, limit: f64 },

    #[error("singular Jacobian (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    Divergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error(
        "continuation diverged at tau = {tau} (last stable eigenvalue {last_re} + {last_im}i)"
    )]
    Continuation {
        tau: f64,
        last_re: f64,
        last_im: f64,
    },

    #[error("linear solve failed: residual {residual:e}")]
    LinearSolve { residual: f64 },

    #[error("time step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical method, false for rejected input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Geometry(_)
                | Error::Domain { .. }
                | Error::Regime(_)
                | Error::Precondition(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
