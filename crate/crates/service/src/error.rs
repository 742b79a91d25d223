use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use causeway_core::knowledge::EditRejection;
use causeway_core::{Error as CoreError, ErrorKind};
use serde_json::json;

/// An error response: status, a stable machine code and a human message.
#[derive(Debug, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: serde_json::Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.to_string(), message: message.into(), details: serde_json::Value::Null }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "schema", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let (status, code) = match e.kind() {
            ErrorKind::Data => (StatusCode::BAD_REQUEST, "data"),
            ErrorKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorKind::Precondition => (StatusCode::UNPROCESSABLE_ENTITY, "precondition"),
            ErrorKind::Numerical => (StatusCode::UNPROCESSABLE_ENTITY, "numerical"),
        };
        let details = match &e {
            CoreError::Parse { line, column, .. } => json!({"line": line, "column": column}),
            _ => serde_json::Value::Null,
        };
        Self { status, code: code.to_string(), message: e.to_string(), details }
    }
}

impl From<EditRejection> for ApiError {
    fn from(r: EditRejection) -> Self {
        let code = serde_json::to_value(r.code).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        Self {
            status: StatusCode::CONFLICT,
            details: json!({"cycle": r.cycle}),
            code,
            message: r.message,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": {"code": self.code, "message": self.message}});
        if !self.details.is_null() {
            body["error"]["details"] = self.details;
        }
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
