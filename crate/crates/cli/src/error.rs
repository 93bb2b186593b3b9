use thiserror::Error;

/// Errors surfaced by the command line, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    #[error("usage: {0}")]
    Usage(String),
    /// Unreadable, malformed or degenerate data (exit 3).
    #[error("data: {0}")]
    Data(String),
    /// Numerical failure (exit 4).
    #[error("numerical: {0}")]
    Numerical(String),
    /// Some acceptance criteria failed (exit 1).
    #[error("{0} acceptance criteria failed")]
    AcceptanceFailed(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AcceptanceFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<mdingarch::Error> for CliError {
    fn from(e: mdingarch::Error) -> Self {
        use mdingarch::Error as E;
        match e {
            E::ParameterDomain(_) | E::Domain(_) | E::Usage(_) => CliError::Usage(e.to_string()),
            E::DegenerateData(_) => CliError::Data(e.to_string()),
            E::SimulationDiverged { .. } | E::Numerical { .. } => CliError::Numerical(e.to_string()),
        }
    }
}
