use std::io;
use std::path::PathBuf;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use meronym_core::ServiceError;
use serde::Serialize;
use thiserror::Error;

use crate::store::StoreError;

/// Failures while starting or stopping the gateway.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config error: {message}")]
    ConfigError { path: Option<PathBuf>, message: String },
    #[error("store unavailable: {0}")]
    StoreUnavailable(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("server error: {0}")]
    Server(io::Error),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::ConfigError { .. } => "ConfigError",
            GatewayError::StoreUnavailable(_) => "StoreUnavailable",
            GatewayError::Bind { .. } => "BindFailed",
            GatewayError::Server(_) => "ServerError",
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

/// An error response: `{"code": ..., "message": ...}` with a matching status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or unknown session token")
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "Forbidden", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "DailyAskQuotaExceeded" | "ExpertDailyCapExceeded" => StatusCode::TOO_MANY_REQUESTS,
        "NotTheEndorser" | "NotAParty" | "NotThePoster" | "NotEnabled" => StatusCode::FORBIDDEN,
        "HandleTaken"
        | "AlreadyClaimed"
        | "NoPendingClaim"
        | "EndorsementAlreadyPendingOrActive"
        | "NotRequested"
        | "NotActive"
        | "NotPending" => StatusCode::CONFLICT,
        "IoError" => StatusCode::INTERNAL_SERVER_ERROR,
        c if c.starts_with("Unknown") => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let code = e.code();
        Self::new(status_for(code), code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "persisting state failed");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "StoreUnavailable", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: &self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
