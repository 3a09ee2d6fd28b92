use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use scenecraft_core::Error;

/// Body of every 4xx and 5xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal-error", message)
    }
}

/// HTTP status for an engine error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "unknown-element" | "unknown-module" | "unknown-label" => StatusCode::NOT_FOUND,
        "duplicate-name" | "duplicate-session" | "already-selected" => StatusCode::CONFLICT,
        "backend-unreachable" | "fixture-exhausted" | "auth-failure" | "bad-backend-response" => {
            StatusCode::BAD_GATEWAY
        }
        "invalid-request" | "io-failure" | "corrupt-file" | "version-mismatch" => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let detail = match &e {
            Error::OutOfRange { min, max, value, .. } => {
                Some(serde_json::json!({"min": min, "max": max, "value": value}))
            }
            Error::Llm(scenecraft_core::llm::LlmError::FixtureExhausted { module, index }) => {
                Some(serde_json::json!({"module": module, "index": index}))
            }
            _ => None,
        };
        ApiError {
            status: status_for(e.code()).as_u16(),
            code: e.code().to_string(),
            message: e.to_string(),
            detail,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// Failures starting the server.
#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot listen: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::PortInUse(_) => "port-in-use",
            ServeError::Io(_) => "io-failure",
        }
    }
}
