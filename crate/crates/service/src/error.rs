use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session `{0}` not found")]
    NotFound(String),

    #[error("session `{0}` is finished")]
    Finished(String),

    #[error("invalid request: {0}")]
    BadRequest(String),

    #[error(transparent)]
    Core(#[from] graphguide::Error),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("event log error: {0}")]
    EventLog(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
