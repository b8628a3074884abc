use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use datamate_core::decomposer::DecomposeError;
use datamate_core::plan::ValidationReport;
use datamate_core::session::SessionError;
use serde::Serialize;

/// JSON error body. `code` is stable; `message` is for people.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Box<ErrorBody>,
}

impl ApiError {
    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: Box::new(ErrorBody {
                code: code.to_string(),
                message: message.into(),
                report: None,
                suggestions: Vec::new(),
                line: None,
            }),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            ..ApiError::bad_request("Internal", message)
        }
    }
}

pub fn status_of(e: &SessionError) -> StatusCode {
    match e {
        SessionError::SessionNotFound(_)
        | SessionError::PipelineNotFound(_)
        | SessionError::StepNotFound { .. } => StatusCode::NOT_FOUND,
        SessionError::Ingest(_) => StatusCode::BAD_REQUEST,
        SessionError::Decompose {
            error: DecomposeError::Transport(_) | DecomposeError::Protocol(_),
            ..
        } => StatusCode::BAD_GATEWAY,
        SessionError::Snapshot(_) => StatusCode::INTERNAL_SERVER_ERROR,
        SessionError::InvalidEdit(_)
        | SessionError::Parse(_)
        | SessionError::Exec(_)
        | SessionError::Datamation(_)
        | SessionError::Decompose { .. } => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = status_of(&e);
        let message = e.to_string();
        let code = e.code().to_string();
        let (report, suggestions, line) = match e {
            SessionError::InvalidEdit(r) => (Some(r), Vec::new(), None),
            SessionError::Decompose { suggestions, .. } => (None, suggestions, None),
            SessionError::Ingest(i) => (None, Vec::new(), i.line()),
            _ => (None, Vec::new(), None),
        };
        ApiError {
            status,
            body: Box::new(ErrorBody {
                code,
                message,
                report,
                suggestions,
                line,
            }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(*self.body)).into_response()
    }
}
