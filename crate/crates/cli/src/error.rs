//! Runner errors and their process exit codes.

use std::path::PathBuf;

use restartk::Error as LibError;
use thiserror::Error;

/// Exit status of a successful run.
pub const EXIT_OK: u8 = 0;
/// The config or an input file could not be read or written.
pub const EXIT_IO: u8 = 1;
/// Schema or parameter validation failed before any work was done.
pub const EXIT_VALIDATION: u8 = 2;
/// A numerical routine failed to deliver a result.
pub const EXIT_NUMERICAL: u8 = 3;
/// The run finished but a checked property was violated.
pub const EXIT_PROPERTY: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("config does not match the schema: {0}")]
    Schema(String),

    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid `{field}`: {source}")]
    Invalid { field: String, source: LibError },

    #[error(transparent)]
    Library(#[from] LibError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Write { .. } => EXIT_IO,
            CliError::Schema(_) | CliError::Config { .. } | CliError::Invalid { .. } => EXIT_VALIDATION,
            CliError::Library(e) => library_exit_code(e),
        }
    }
}

/// Input errors map to the validation code and failures of a numerical
/// routine to the numerical code.
pub fn library_exit_code(e: &LibError) -> u8 {
    match e {
        LibError::InvalidParameter { .. }
        | LibError::UnsupportedTarget(_)
        | LibError::SingularityAtOrigin
        | LibError::DomainError(_)
        | LibError::DensityUnavailable
        | LibError::UnknownState(_)
        | LibError::InvalidRateMatrix { .. }
        | LibError::StateSpaceMismatch(_)
        | LibError::EtaNotLessThanLambda { .. }
        | LibError::WindowTooNarrow { .. } => EXIT_VALIDATION,
        LibError::QuadratureFailure(_)
        | LibError::MomentUnavailable { .. }
        | LibError::MatrixOverflow(_)
        | LibError::SingularSystem(_) => EXIT_NUMERICAL,
    }
}
