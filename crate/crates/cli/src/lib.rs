//! Library side of the `dfp` command: configuration, the subcommands and
//! the files they write.

pub mod commands;
pub mod config;
pub mod export;

use dfp_core::DfpError;

/// Process exit codes.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_CONFIG: i32 = 2;
    pub const CHECKPOINT_VERSION: i32 = 3;
    pub const NOT_CONTRACTIVE: i32 = 4;
}

/// An error that ends the process with a specific code.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl Exit {
    pub fn config(message: String) -> Self {
        Self {
            code: exit_code::INVALID_CONFIG,
            message,
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            code: exit_code::FAILURE,
            message: message.into(),
        }
    }
}

impl From<DfpError> for Exit {
    fn from(e: DfpError) -> Self {
        let code = match &e {
            DfpError::InvalidParameter { .. } => exit_code::INVALID_CONFIG,
            DfpError::FormatVersion { .. } => exit_code::CHECKPOINT_VERSION,
            _ => exit_code::FAILURE,
        };
        let message = match &e {
            DfpError::InvalidParameter { field, reason } => format!("invalid config at `{field}`: {reason}"),
            other => other.to_string(),
        };
        Self { code, message }
    }
}

impl From<std::io::Error> for Exit {
    fn from(e: std::io::Error) -> Self {
        Exit::failure(e.to_string())
    }
}

impl From<csv::Error> for Exit {
    fn from(e: csv::Error) -> Self {
        Exit::failure(e.to_string())
    }
}

impl From<serde_json::Error> for Exit {
    fn from(e: serde_json::Error) -> Self {
        Exit::failure(e.to_string())
    }
}
