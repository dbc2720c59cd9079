use alloc::string::String;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A root-finding bracket has no sign change.
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    /// The spectral factorization backend did not converge.
    #[error("spectral factorization did not converge")]
    Factorization,
    /// The measurement operator is (numerically) rank deficient.
    #[error("measurement operator is rank deficient")]
    RankDeficientOperator,
    /// The recovery solver hit its iteration limit before meeting its tolerances.
    #[error("no convergence after {iterations} iterations (feasibility {feasibility:e}, gap {gap:e})")]
    NonConvergence {
        iterations: usize,
        feasibility: f64,
        gap: f64,
    },
    /// Experiment geometry is inconsistent (e.g. rank larger than the matrix).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    /// Not enough information to fit a model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
