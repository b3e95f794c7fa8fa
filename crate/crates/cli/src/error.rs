use rieszflow::curve::CurveError;
use rieszflow::diagnostics::DiagnosticsError;
use rieszflow::dynamics::DynamicsError;
use rieszflow::oracle::OracleError;
use rieszflow::riesz::RieszError;
use std::path::Path;
use thiserror::Error;

/// Every failure maps onto one of three exit codes: 2 for anything wrong
/// with the inputs (flags, config contents, point files), 3 when the flow
/// itself becomes too stiff to integrate, 4 for file-system trouble.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Stiff(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stiff(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<DynamicsError> for CliError {
    fn from(err: DynamicsError) -> CliError {
        match err {
            DynamicsError::Stiffness { .. } => CliError::Stiff(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<RieszError> for CliError {
    fn from(err: RieszError) -> CliError {
        CliError::Config(err.to_string())
    }
}

impl From<CurveError> for CliError {
    fn from(err: CurveError) -> CliError {
        CliError::Config(err.to_string())
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(err: DiagnosticsError) -> CliError {
        CliError::Config(err.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(err: OracleError) -> CliError {
        CliError::Config(err.to_string())
    }
}
