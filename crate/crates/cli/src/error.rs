use thiserror::Error;

/// A command failure, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable file, invalid config, unsupported request. Exit 2.
    #[error("{0}")]
    Usage(String),
    /// A check did not pass or the run broke. Exit 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<cellres_core::Error> for CliError {
    fn from(e: cellres_core::Error) -> Self {
        use cellres_core::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::Io { .. }
            | E::Parse(_)
            | E::OutsideDomain(_)
            | E::EmptyLattice { .. }
            | E::StateMismatch(_)
            | E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
