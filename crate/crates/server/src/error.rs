use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use streamtgn_proto::{ErrorBody, ErrorKind};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error(transparent)]
    Core(#[from] streamtgn_core::Error),

    #[error("session {0} not found")]
    SessionNotFound(u64),

    #[error("edge queue is full")]
    QueueFull,

    #[error("worker task failed: {0}")]
    Worker(#[from] tokio::task::JoinError),
}

impl ApiError {
    fn status_and_kind(&self) -> (StatusCode, ErrorKind) {
        match self {
            ApiError::Core(e) if e.is_input_error() => (StatusCode::BAD_REQUEST, ErrorKind::Input),
            ApiError::Core(streamtgn_core::Error::Dimension { .. } | streamtgn_core::Error::OutOfBounds { .. }) => {
                (StatusCode::BAD_REQUEST, ErrorKind::Input)
            }
            ApiError::Core(_) | ApiError::Worker(_) => (StatusCode::INTERNAL_SERVER_ERROR, ErrorKind::Internal),
            ApiError::SessionNotFound(_) => (StatusCode::NOT_FOUND, ErrorKind::NotFound),
            ApiError::QueueFull => (StatusCode::TOO_MANY_REQUESTS, ErrorKind::QueueFull),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = self.status_and_kind();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let line = match &self {
            ApiError::Core(streamtgn_core::Error::Parse { line, .. }) if *line > 0 => Some(*line),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            kind,
            line,
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
