use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("unknown session `{0}`")]
    NotFound(String),

    #[error("trial index {got} submitted, expected {expected}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("trial {0} was already answered differently")]
    ConflictingDuplicate(usize),

    #[error("session `{0}` is already completed")]
    Completed(String),

    #[error("stimulus pool exhausted: {0}")]
    PoolExhausted(String),

    #[error("no completed sessions for {0}")]
    NoCompletedSessions(String),

    #[error("corrupt study log {path} at line {line}: {message}")]
    CorruptLog {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] fvlab_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StudyError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            StudyError::BadRequest(_) => "bad_request",
            StudyError::NotFound(_) => "not_found",
            StudyError::OutOfOrder { .. } => "out_of_order",
            StudyError::ConflictingDuplicate(_) => "conflicting_duplicate",
            StudyError::Completed(_) => "session_completed",
            StudyError::PoolExhausted(_) => "pool_exhausted",
            StudyError::NoCompletedSessions(_) => "no_completed_sessions",
            StudyError::CorruptLog { .. } => "corrupt_log",
            StudyError::Core(_) | StudyError::Io(_) | StudyError::Json(_) => "internal",
        }
    }
}

pub type Result<T, E = StudyError> = std::result::Result<T, E>;
