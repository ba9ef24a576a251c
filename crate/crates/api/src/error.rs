//! The error envelope every failing request returns.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use taforge_core::Error as CoreError;

/// Every machine code the service can emit.
pub const MACHINE_CODES: &[&str] = &[
    "invalid_request",
    "invalid_argument",
    "invalid_filter",
    "invalid_action",
    "empty_input",
    "invalid_encoding",
    "incompatible_vectors",
    "degenerate_vector",
    "empty_index",
    "unauthorized",
    "route_not_found",
    "workspace_not_found",
    "job_not_found",
    "not_found",
    "workspace_exists",
    "workspace_busy",
    "workspace_degraded",
    "phase_order_violation",
    "stale_upstream",
    "stale_state",
    "precondition_failed",
    "name_conflict",
    "quote_not_found",
    "provider_error",
    "structured_output_error",
    "template_error",
    "storage_error",
    "internal_error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{machine_code}: {message}")]
pub struct ApiError {
    pub http_status: u16,
    pub machine_code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        debug_assert!(MACHINE_CODES.contains(&code), "undocumented machine code {code}");
        ApiError {
            http_status: status.as_u16(),
            machine_code: code.to_string(),
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn workspace_not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "workspace_not_found", format!("no workspace {id:?}"))
    }

    pub fn busy(id: &str, job_id: Option<&str>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "workspace_busy", format!("workspace {id} is running a job"))
            .with_details(json!({ "job_id": job_id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        use CoreError::*;
        let message = e.to_string();
        let (status, code, details) = match &e {
            Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error", Value::Null),
            Corrupt(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error", Value::Null),
            EmptyInput(_) => (StatusCode::BAD_REQUEST, "empty_input", Value::Null),
            Encoding { .. } => (StatusCode::BAD_REQUEST, "invalid_encoding", Value::Null),
            InvalidFilter(_) => (StatusCode::BAD_REQUEST, "invalid_filter", Value::Null),
            InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument", Value::Null),
            IncompatibleVectors(_) => (StatusCode::BAD_REQUEST, "incompatible_vectors", Value::Null),
            DegenerateVector => (StatusCode::BAD_REQUEST, "degenerate_vector", Value::Null),
            EmptyIndex => (StatusCode::CONFLICT, "empty_index", Value::Null),
            Provider { retryable, .. } => (StatusCode::BAD_GATEWAY, "provider_error", json!({ "retryable": retryable })),
            StructuredOutput { .. } => (StatusCode::BAD_GATEWAY, "structured_output_error", Value::Null),
            Template(_) => (StatusCode::INTERNAL_SERVER_ERROR, "template_error", Value::Null),
            PreconditionFailed(_) => (StatusCode::CONFLICT, "precondition_failed", Value::Null),
            PhaseOrder(_) => (StatusCode::CONFLICT, "phase_order_violation", Value::Null),
            StaleUpstream(ps) => (StatusCode::CONFLICT, "stale_upstream", json!({ "stale_phases": ps })),
            StaleState(ps) => (StatusCode::CONFLICT, "stale_state", json!({ "stale_phases": ps })),
            NotFound(_) => (StatusCode::NOT_FOUND, "not_found", Value::Null),
            QuoteNotFound { post_id } => (StatusCode::UNPROCESSABLE_ENTITY, "quote_not_found", json!({ "post_id": post_id })),
            InvalidAction(_) => (StatusCode::BAD_REQUEST, "invalid_action", Value::Null),
            NameConflict(_) => (StatusCode::CONFLICT, "name_conflict", Value::Null),
            Json(_) => (StatusCode::BAD_REQUEST, "invalid_request", Value::Null),
        };
        ApiError::new(status, code, message).with_details(details)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
