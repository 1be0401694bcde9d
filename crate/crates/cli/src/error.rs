use hypflow_core::delaunay::DelaunayError;
use hypflow_core::flows::FlowError;
use hypflow_core::meshfile::MeshFileError;
use hypflow_core::solver::SolveError;
use thiserror::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_USAGE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn from_code(code: u8, message: String) -> Self {
        match code {
            EXIT_VALIDATION => CliError::Validation(message),
            EXIT_NUMERICAL => CliError::Numerical(message),
            _ => CliError::Usage(message),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<MeshFileError> for CliError {
    fn from(e: MeshFileError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DelaunayError> for CliError {
    fn from(e: DelaunayError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Config(m) => CliError::Usage(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Config(m) => CliError::Usage(m),
            e @ SolveError::TargetOutOfRange(..) => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
