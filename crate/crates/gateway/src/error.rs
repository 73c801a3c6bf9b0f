use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use remini_core::conversation::SessionError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("unknown or closed session {0}")]
    UnknownSession(String),
    #[error("unknown participant {0}")]
    UnknownParticipant(String),
    #[error("invalid join token")]
    Unauthorized,
    #[error("message has {len} characters, the limit is {max}")]
    OversizeMessage { len: usize, max: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid session request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Rejected(#[from] SessionError),
    #[error("session is paused: {0}")]
    Paused(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::UnknownSession(_) => "unknown_session",
            GatewayError::UnknownParticipant(_) => "unknown_participant",
            GatewayError::Unauthorized => "unauthorized",
            GatewayError::OversizeMessage { .. } => "oversize_message",
            GatewayError::InvalidFrame(_) => "invalid_frame",
            GatewayError::InvalidRequest(_) => "invalid_request",
            GatewayError::Rejected(_) => "rejected",
            GatewayError::Paused(_) => "paused",
            GatewayError::Internal(_) => "internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            GatewayError::UnknownSession(_) => StatusCode::NOT_FOUND,
            GatewayError::UnknownParticipant(_) | GatewayError::Unauthorized => StatusCode::FORBIDDEN,
            GatewayError::OversizeMessage { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            GatewayError::InvalidFrame(_) | GatewayError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            GatewayError::Rejected(_) => StatusCode::CONFLICT,
            GatewayError::Paused(_) => StatusCode::SERVICE_UNAVAILABLE,
            GatewayError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind(), "detail": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
