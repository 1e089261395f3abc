use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("exponential overflow guard tripped: |(phi±psi)/2| = {0:.3e} exceeds 50")]
    Overflow(f64),
    #[error("loss of accuracy near Legendre zero t = {zero:.6}: one-sided limits differ by {jump:.3e}")]
    LossOfAccuracy { zero: f64, jump: f64 },
    #[error("input is not integrable on the grid: {0}")]
    NonIntegrable(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("requested radius {0} lies outside the grid support")]
    OutsideSupport(f64),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("continuation step size underflow at arclength {0:.6e}")]
    StepUnderflow(f64),
    #[error("integral diverges: tail estimate {tail:.3e} vs integral {total:.3e}")]
    Divergent { tail: f64, total: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
