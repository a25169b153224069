use serde::Serialize;

/// Exit status for a rejected configuration.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status when an instance exceeds a resource cap.
pub const EXIT_RESOURCE: i32 = 3;
/// Exit status for I/O and other failures.
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] urnlab_core::Error),
    #[error("{0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type AppResult<T> = Result<T, AppError>;

/// Machine-readable error line written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl AppError {
    pub fn kind(&self) -> &'static str {
        use urnlab_core::Error as E;
        match self {
            AppError::Core(E::HorizonExceeded { .. } | E::SizeCap(_) | E::AttemptsExhausted { .. }) => "resource_cap",
            AppError::Core(_) | AppError::Validation(_) => "validation",
            AppError::Io(_) => "io",
            AppError::Json(_) => "json",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "resource_cap" => EXIT_RESOURCE,
            "validation" => EXIT_VALIDATION,
            _ => EXIT_OTHER,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}
