//! IO and orchestration around `motion-grader-core`: dataset directory
//! scanning, config resolution, report files, and the subcommand
//! implementations behind the `motion-grader` binary.

pub mod commands;
pub mod config;
pub mod report_io;
pub mod run;
pub mod scan;

/// Process outcome. Exit codes: 0 success, 1 usage error, 2 data error,
/// 3 internal error.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Internal(m) => m,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for AppError {}

pub type AppResult<T> = Result<T, AppError>;

pub(crate) fn internal(err: impl std::fmt::Display) -> AppError {
    AppError::Internal(err.to_string())
}
