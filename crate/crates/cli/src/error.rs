use std::io;
use std::path::PathBuf;

use formation_core::FormationError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{origin}:{line}:{column}: field `{field}`: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    #[error("scenario {scenario}: {message}")]
    Scenario { scenario: String, message: String },

    #[error("scenario {scenario}, stage {stage}: {source}")]
    Stage {
        scenario: String,
        stage: &'static str,
        #[source]
        source: FormationError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } if !source.is_validation() => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn formation_error(&self) -> Option<&FormationError> {
        match self {
            CliError::Stage { source, .. } => Some(source),
            _ => None,
        }
    }
}
