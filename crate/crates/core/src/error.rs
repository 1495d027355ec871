use thiserror::Error;

/// Errors surfaced by the laboratory.
///
/// Variants follow the failure classes the CLI maps to exit codes: usage and
/// config errors are caller mistakes, resource and numeric errors come from
/// the run itself.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("resource error: {0}")]
    Resource(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    /// Several config violations found in one pass.
    #[error("{} config violation(s):\n{}", .0.len(), list(.0))]
    Invalid(Vec<LabError>),
}

fn list(errors: &[LabError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl LabError {
    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }

    /// Whether the caller's configuration is at fault.
    pub fn is_config(&self) -> bool {
        matches!(self, LabError::Config { .. } | LabError::Invalid(_) | LabError::Parse(_) | LabError::Usage(_))
    }

    pub fn io(path: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        LabError::Io {
            path: path.to_string(),
            message: err.to_string(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
