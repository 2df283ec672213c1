//! Every failure leaves the service as `{code, message, path}` JSON.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use homeview_core::analytics::AnalyticsError;
use homeview_core::dashboard::{ConfigError, DashboardError};
use homeview_core::gateway::GatewayError;
use homeview_core::pipeline::PipelineError;
use homeview_core::provenance::ProvenanceError;
use homeview_core::summary::EngineError;
use homeview_core::RecordError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// Offending field path for validation errors, otherwise the request path.
    pub path: String,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), field: None }
    }

    pub fn at(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn body(&self, request_path: &str) -> ErrorBody {
        ErrorBody {
            code: self.code.to_string(),
            message: self.message.clone(),
            path: self.field.clone().unwrap_or_else(|| request_path.to_string()),
        }
    }
}

/// Error awaiting the request path, carried in response extensions.
#[derive(Debug, Clone)]
pub(crate) struct PendingError(pub ApiError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        // The request path is filled in by `attach_request_path`.
        let mut response = (self.status, Json(self.body(""))).into_response();
        response.extensions_mut().insert(PendingError(self));
        response
    }
}

const UNPROCESSABLE: StatusCode = StatusCode::UNPROCESSABLE_ENTITY;

impl From<RecordError> for ApiError {
    fn from(e: RecordError) -> Self {
        let field = e.path().map(str::to_string);
        let (status, code) = match &e {
            RecordError::UnknownRecord(_) => (StatusCode::NOT_FOUND, "unknown_record"),
            RecordError::UnknownEntry(_) => (StatusCode::NOT_FOUND, "unknown_entry"),
            RecordError::AlreadyExists(_) => (StatusCode::CONFLICT, "already_exists"),
            RecordError::Schema { .. } => (UNPROCESSABLE, "schema"),
            RecordError::Range { .. } => (UNPROCESSABLE, "out_of_range"),
            RecordError::DuplicateId(_) => (UNPROCESSABLE, "duplicate_id"),
            RecordError::Validation { .. } => (UNPROCESSABLE, "validation"),
            RecordError::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_store"),
            RecordError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_io"),
        };
        let mut out = ApiError::new(status, code, e.to_string());
        out.field = field;
        out
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        let field = match e {
            ConfigError::DuplicatePriority(_) => "summary_priorities",
            ConfigError::Version(_) => "version",
        };
        ApiError::new(UNPROCESSABLE, "invalid_config", e.to_string()).at(field)
    }
}

impl From<DashboardError> for ApiError {
    fn from(e: DashboardError) -> Self {
        ApiError::new(UNPROCESSABLE, "invalid_selection", e.to_string()).at("widgets")
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::InvalidWindow { .. } => ApiError::new(UNPROCESSABLE, "invalid_window", e.to_string()).at("to"),
            AnalyticsError::ThresholdMismatch { .. } => ApiError::new(UNPROCESSABLE, "threshold_mismatch", e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptyQuestion => ApiError::new(UNPROCESSABLE, "empty_question", e.to_string()).at("question"),
            PipelineError::SummaryDisabled => ApiError::new(UNPROCESSABLE, "summary_disabled", e.to_string()),
            PipelineError::Config(c) => c.into(),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let (status, code) = match &e {
            GatewayError::ProviderUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable"),
            GatewayError::Timeout => (StatusCode::GATEWAY_TIMEOUT, "provider_timeout"),
            GatewayError::QuotaExceeded => (StatusCode::TOO_MANY_REQUESTS, "quota_exceeded"),
            GatewayError::InvalidParams(_) => (StatusCode::INTERNAL_SERVER_ERROR, "invalid_params"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<ProvenanceError> for ApiError {
    fn from(e: ProvenanceError) -> Self {
        match e {
            ProvenanceError::DanglingAnchor { .. } => ApiError::new(StatusCode::NOT_FOUND, "dangling_anchor", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "provenance", e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Record(e) => e.into(),
            EngineError::Config(e) => e.into(),
            EngineError::Pipeline(e) => e.into(),
            EngineError::Provider(e) => e.into(),
            EngineError::Provenance(e) => e.into(),
            EngineError::GenerationFailed { ref violations, attempts } => {
                let codes: Vec<String> = violations.iter().map(|v| v.code()).collect();
                ApiError::new(
                    StatusCode::BAD_GATEWAY,
                    "generation_failed",
                    format!("model output rejected after {attempts} attempts: {}", codes.join(", ")),
                )
            }
        }
    }
}
