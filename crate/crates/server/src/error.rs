use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use labelforge::project::ProjectError;
use serde::Serialize;

/// An error response: `{code, message}` with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_string(), message: message.into() }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        use ProjectError::*;
        let status = match &e {
            StaleToken(_) => StatusCode::CONFLICT,
            UnknownDocument(_) | UnknownFunction(_) => StatusCode::NOT_FOUND,
            NoModel | NoTestSet | Sampler(_) => StatusCode::CONFLICT,
            CorruptLog(_) | Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        (self.status, Json(ErrorBody { code: &self.code, message: &self.message })).into_response()
    }
}
