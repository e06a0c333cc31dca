use thiserror::Error;

/// Failures of the harness, each with a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("no valid sequence: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Validation(_) | CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

impl From<multistage::Error> for CliError {
    fn from(e: multistage::Error) -> Self {
        use multistage::Error as E;
        match e {
            E::NotConverged { .. } => CliError::Numerical(e.to_string()),
            E::NonCompliantLadder(_) => CliError::Infeasible(e.to_string()),
            E::InvalidParameter { .. }
            | E::InvalidInput(_)
            | E::EmptyLocalMaximizers { .. }
            | E::InvalidWindow { .. } => CliError::Config(e.to_string()),
        }
    }
}
