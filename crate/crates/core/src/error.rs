use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("gateway error: {0}")]
    Gateway(String),

    #[error("missing predictions for {} instance(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Provider,
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Capability(_) | Error::Gateway(_) => ErrorClass::Provider,
            Error::Invariant(_) => ErrorClass::Invariant,
            Error::Validation(_)
            | Error::Sizing(_)
            | Error::Parse { .. }
            | Error::Coverage(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Data,
        }
    }
}
