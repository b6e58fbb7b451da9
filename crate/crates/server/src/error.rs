use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use musicscaffold_core::interpret::InterpretError;
use musicscaffold_core::library::LibraryError;
use musicscaffold_core::refine::RefineError;
use musicscaffold_core::render::RenderError;
use musicscaffold_core::store::StoreError;
use musicscaffold_core::Violation;

/// Wire form of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                violations: Vec::new(),
            },
        }
    }

    pub fn invalid_plan(violations: Vec<Violation>) -> ApiError {
        let message = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidPlan", message);
        err.body.violations = violations;
        err
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", message)
    }

    pub fn storage(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailure", message)
    }

    pub fn code(&self) -> &str {
        &self.body.code
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.body.code, self.body.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<InterpretError> for ApiError {
    fn from(e: InterpretError) -> Self {
        let message = e.to_string();
        match e {
            InterpretError::EmptyIntent => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyIntent", message),
            InterpretError::BackendUnavailable(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", message)
            }
            InterpretError::MalformedBackendOutput(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "MalformedBackendOutput", message)
            }
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::EmptyDatabase => ApiError::new(
                StatusCode::CONFLICT,
                "EmptyDatabase",
                "the segment corpus is empty; ingest a corpus or run seed-corpus first",
            ),
            StoreError::MidiParse(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MidiParse", message),
            StoreError::IllegalTag(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "IllegalTag", message),
            StoreError::IllegalContent(_) | StoreError::InvalidId(_) | StoreError::DuplicateSegment(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidSegment", message)
            }
            StoreError::Corpus(_) | StoreError::Io(_) => ApiError::storage(message),
        }
    }
}

impl From<RefineError> for ApiError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::InvalidPlan(v) => ApiError::invalid_plan(v),
            RefineError::EmptyPrompt => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyPrompt", e.to_string())
            }
            RefineError::RuleFailure { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "RuleFailure", e.to_string())
            }
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        let message = e.to_string();
        match e {
            RenderError::BackendUnavailable(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", message)
            }
            RenderError::RenderRejected(_) => ApiError::new(StatusCode::BAD_GATEWAY, "RenderRejected", message),
            RenderError::InvalidPlan(v) => ApiError::invalid_plan(v),
            RenderError::EmptyPrompt => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyPrompt", message),
            RenderError::Storage(_) => ApiError::storage(message),
        }
    }
}

impl From<LibraryError> for ApiError {
    fn from(e: LibraryError) -> Self {
        let message = e.to_string();
        match e {
            LibraryError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", message),
            LibraryError::HistoryConflict { .. } => ApiError::new(StatusCode::CONFLICT, "HistoryConflict", message),
            LibraryError::InvalidEntry(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidEntry", message)
            }
            LibraryError::InvalidPlan(v) => ApiError::invalid_plan(v),
            LibraryError::StorageFailure(_) => ApiError::storage(message),
        }
    }
}
