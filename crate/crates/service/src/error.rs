use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use stylemorpheus::Error;

/// Error response body: `{"error": kind, "field": ..., "message": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub field: Option<String>,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, kind: "argument", field: Some(field.into()), message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, kind: "not_found", field: None, message: message.into() }
    }

    pub fn busy() -> Self {
        Self {
            status: StatusCode::CONFLICT,
            kind: "busy",
            field: None,
            message: "model busy: render queue is full".into(),
        }
    }

    pub fn no_model() -> Self {
        Self { status: StatusCode::SERVICE_UNAVAILABLE, kind: "no_model", field: None, message: "no model loaded".into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, kind: "internal", field: None, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument { field, reason } => Self::bad_request(field, reason),
            Error::Image { ref reason, .. } => Self::bad_request("image", reason.clone()),
            other => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                kind: other.kind(),
                field: None,
                message: other.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind, "field": self.field, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}
