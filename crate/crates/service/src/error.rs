use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emobase::eval::EvalError;
use emobase::features::FeatureError;
use emobase::learn::LearnError;
use emobase::protocol::ProtocolError;
use emobase::signal::SignalError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    /// Malformed request: unparsable body, bad identifier.
    #[error("{0}")]
    BadRequest(String),
    /// Well-formed request that violates a domain rule.
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Conflict(String),
    /// A stored artifact no longer matches its recorded content hash.
    #[error("{0}")]
    Integrity(String),
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// Wire format of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Integrity(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Validation(_) => "validation_error",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Integrity(_) => "integrity_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { code: self.code().into(), message: self.to_string() }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(format!("store i/o: {e}"))
    }
}

impl From<ProtocolError> for ServiceError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::PoolExhausted(_) | ProtocolError::Infeasible(_) => ServiceError::Conflict(e.to_string()),
            _ => ServiceError::Validation(e.to_string()),
        }
    }
}

impl From<SignalError> for ServiceError {
    fn from(e: SignalError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}

impl From<FeatureError> for ServiceError {
    fn from(e: FeatureError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}

impl From<LearnError> for ServiceError {
    fn from(e: LearnError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}

impl From<EvalError> for ServiceError {
    fn from(e: EvalError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}
