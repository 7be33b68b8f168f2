use std::path::Path;

use runaudit::AuditError;

/// Failure of a CLI invocation, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Usage or configuration problem (exit 2).
    #[error("{0}")]
    Config(String),
    /// Input data failed to load or validate (exit 3).
    #[error("{0}")]
    Data(String),
    /// An internal consistency check failed (exit 4).
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn missing_path(flag: &str, path: &Path) -> Self {
        CliError::Config(format!("{flag} {}: no such file", path.display()))
    }

    pub fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::InvalidConfig(_) | AuditError::InvalidScheme(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Errors from configuration inputs (schema, lexicons, config files) are usage errors.
pub(crate) fn as_config(e: AuditError) -> CliError {
    CliError::Config(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;
