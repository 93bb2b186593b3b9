use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or model parameter lies outside its admissible region.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// An argument (probability, index, count) lies outside its domain.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The call does not make sense for the given configuration.
    #[error("usage: {0}")]
    Usage(String),

    /// The data cannot support the requested computation.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A simulated intensity became non-finite.
    #[error("simulation diverged at t = {t}: {detail}")]
    SimulationDiverged { t: usize, detail: String },

    /// An iterative numerical routine failed.
    #[error("numerical failure: {detail} (residual {residual:e})")]
    Numerical { detail: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }
}
