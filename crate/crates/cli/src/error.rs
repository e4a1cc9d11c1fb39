use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Internal error, a failed check, or a comparison above tolerance.
    pub const FAILURE: u8 = 1;
    /// Unreadable or invalid input, unknown bundle, group mismatch.
    pub const USAGE: u8 = 2;
    /// The exact transform stopped at `max_horizon` with mass above epsilon.
    pub const TRUNCATED: u8 = 3;
    /// A verification check could not reach a verdict.
    pub const INCONCLUSIVE: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse { file: String, line: usize, column: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError::Internal(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => exit::USAGE,
            CliError::Internal(_) => exit::FAILURE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o error: {e}"))
    }
}
