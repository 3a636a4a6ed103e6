use thiserror::Error;

/// Errors raised by evaluators, samplers and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature ran out of subdivisions. Carries the best
    /// estimate reached and its error bound.
    #[error("quadrature failed to converge: estimate {estimate:e}, error bound {error_bound:e}")]
    QuadratureFailure { estimate: f64, error_bound: f64 },

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("no stationary distribution: {0}")]
    NoStationaryDistribution(String),

    /// A numerically integrated flow left the unit interval.
    #[error("flow left [0, 1] at t = {time}: value {value}")]
    DomainEscape { time: f64, value: f64 },

    #[error("simulation aborted: {0}")]
    SimulationAbort(String),

    #[error("failed to converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
