//! Command-line failures and their exit codes.

use std::fmt;
use std::path::Path;

use mesofluct::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Validation { field: String, reason: String },
    Numerical(Error),
    Io { path: String, reason: String },
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation { field: field.into(), reason: reason.into() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), reason: e.to_string() }
    }

    /// Classify a core error; `field` names the input behind validation
    /// errors that do not carry a field of their own.
    pub fn core(e: Error, field: &str) -> Self {
        match e {
            Error::InvalidInput { field, reason } => CliError::Validation { field, reason },
            e if e.is_validation() => CliError::Validation { field: field.to_string(), reason: e.to_string() },
            e => CliError::Numerical(e),
        }
    }

    pub fn with_field(self, name: String) -> Self {
        match self {
            CliError::Validation { reason, .. } => CliError::Validation { field: name, reason },
            other => other,
        }
    }

    #[cfg(test)]
    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// One line of `key=value` pairs, the message last.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation { field, reason } => {
                write!(f, "code={EXIT_VALIDATION} kind=validation field={field} message={reason}")
            }
            CliError::Numerical(e) => write!(f, "code={EXIT_NUMERICAL} kind=numerical message={e}"),
            CliError::Io { path, reason } => write!(f, "code={EXIT_IO} kind=io path={path} message={reason}"),
        }
    }
}

impl std::error::Error for CliError {}
