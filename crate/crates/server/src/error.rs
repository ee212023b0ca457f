use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use diymkg_core::expansion::ExpansionError;
use diymkg_core::graph::GraphError;
use diymkg_core::llm::LlmError;
use diymkg_core::quiz::QuizError;
use serde::Serialize;

/// Error body returned by every endpoint: `{status, code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn invalid_selection(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidSelection", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }
}

/// Every code the API can return, with its status.
pub const ERROR_CODES: &[(&str, u16)] = &[
    ("BadRequest", 400),
    ("NotFound", 404),
    ("MethodNotAllowed", 405),
    ("DuplicateWord", 409),
    ("DuplicateEdge", 409),
    ("DuplicateSnapshotName", 409),
    ("EmptyGraph", 409),
    ("NotGraded", 409),
    ("EmptyWord", 422),
    ("InvalidLanguage", 422),
    ("InvalidTag", 422),
    ("SelfLoop", 422),
    ("TooFewNodes", 422),
    ("InvalidDocumentRef", 422),
    ("InvalidRadius", 422),
    ("InvalidSnapshotName", 422),
    ("InvalidRequest", 422),
    ("InvalidSelection", 422),
    ("InvalidTask", 422),
    ("LengthMismatch", 422),
    ("IndexOutOfRange", 422),
    ("IntegrityError", 500),
    ("SchemaVersionMismatch", 500),
    ("ParseError", 500),
    ("IoError", 500),
    ("TemplateError", 500),
    ("ConfigError", 500),
    ("InternalError", 500),
    ("TransportError", 502),
    ("AuthError", 502),
    ("MalformedOutput", 502),
    ("BatchRejected", 502),
    ("GenerationFailed", 502),
    ("TimeoutError", 504),
];

fn status_of(code: &str) -> StatusCode {
    ERROR_CODES
        .iter()
        .find(|(c, _)| *c == code)
        .and_then(|(_, s)| StatusCode::from_u16(*s).ok())
        .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

fn from_code(code: &'static str, message: String) -> ApiError {
    ApiError::new(status_of(code), code, message)
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        from_code(e.code(), e.to_string())
    }
}

impl From<LlmError> for ApiError {
    fn from(e: LlmError) -> Self {
        from_code(e.code(), e.to_string())
    }
}

impl From<ExpansionError> for ApiError {
    fn from(e: ExpansionError) -> Self {
        from_code(e.code(), e.to_string())
    }
}

impl From<QuizError> for ApiError {
    fn from(e: QuizError) -> Self {
        from_code(e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
