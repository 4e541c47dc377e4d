use thiserror::Error;

/// Errors raised by models, simulations and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite state at t = {time:.6} s")]
    NonFinite { time: f64 },

    #[error("spring over-compressed at t = {time:.6} s (x = {compression:.6} m, max {max:.6} m)")]
    OverCompression { time: f64, compression: f64, max: f64 },

    #[error("foot penetration {depth:.6} m exceeds tolerance at t = {time:.6} s")]
    Penetration { time: f64, depth: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("input too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("column '{0}' is constant")]
    ConstantColumn(String),

    #[error("channel '{0}' has no threshold crossings")]
    SilentChannel(String),

    #[error("covariance lost positive semi-definiteness at t = {time:.6} s (min eigenvalue {min_eigenvalue:e})")]
    CovarianceNotPsd { time: f64, min_eigenvalue: f64 },

    #[error("simulation failed at f = {frequency} Hz: {source}")]
    AtFrequency {
        frequency: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}
