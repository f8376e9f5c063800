use thiserror::Error;

/// Process exit status for a finished run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
/// Configuration errors and failed hypotheses.
pub const EXIT_INVALID: i32 = 2;
/// Reading or writing files failed.
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Engine(#[from] hgframe_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => EXIT_IO,
            _ => EXIT_INVALID,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
