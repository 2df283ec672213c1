//! Completion providers, the call log, and validators for model output.
//!
//! Every completion goes through [`Gateway::complete`], which refuses any
//! parameters other than the production contract and appends one
//! [`CallRecord`] per provider call.

mod mock;
mod remote;
mod validate;

use std::path::PathBuf;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pipeline::PromptDocument;

pub use mock::{conforming_chat, conforming_summary, MockProvider};
pub use remote::RemoteProvider;
pub use validate::{
    validate_chat, validate_summary, ChatAnswer, SummaryDocument, SummarySection, ValidationContext, Violation,
    DIAGNOSTIC_BLOCKLIST, INSUFFICIENT_DATA, NO_FOCUS_DATA, NO_SUMMARY_TEXT,
};

/// Sampling temperature of every production completion.
pub const PRODUCTION_TEMPERATURE: f64 = 0.7;
pub const SUMMARY_MAX_TOKENS: u32 = 1500;
pub const CHAT_MAX_TOKENS: u32 = 800;
pub const DEFAULT_RETRY_BUDGET: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// No exemplars are ever injected into prompts.
    pub zero_shot: bool,
}

impl InferenceParams {
    pub fn summary() -> Self {
        Self { temperature: PRODUCTION_TEMPERATURE, max_output_tokens: SUMMARY_MAX_TOKENS, zero_shot: true }
    }

    pub fn chat() -> Self {
        Self { temperature: PRODUCTION_TEMPERATURE, max_output_tokens: CHAT_MAX_TOKENS, zero_shot: true }
    }

    pub fn is_production(&self) -> bool {
        self.temperature == PRODUCTION_TEMPERATURE && self.zero_shot && self.max_output_tokens > 0
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider timed out")]
    Timeout,
    #[error("provider quota exceeded")]
    QuotaExceeded,
    #[error("inference parameters rejected: {0}")]
    InvalidParams(String),
}

/// A completion backend. Implementations must be deterministic for the
/// mock and may be networked otherwise.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &PromptDocument, params: &InferenceParams) -> Result<String, GatewayError>;
}

/// SHA-256 hex of the rendered prompt; the key of mock scripts.
pub fn prompt_digest(prompt: &PromptDocument) -> String {
    hex::encode(Sha256::digest(prompt.render().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CallOutcome {
    Completed { output_digest: String },
    Failed { error: GatewayError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: u64,
    pub provider: String,
    pub prompt_digest: String,
    pub params: InferenceParams,
    pub started_at: DateTime<Utc>,
    pub outcome: CallOutcome,
}

/// A validated completion and the number of attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated<T> {
    pub value: T,
    pub raw: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenerationError {
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error("output rejected after {attempts} attempts: {}", summarize_violations(.violations))]
    Rejected { violations: Vec<Violation>, attempts: u32 },
}

fn summarize_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub struct Gateway {
    provider: Box<dyn Provider>,
    retry_budget: u32,
    log: Mutex<Vec<CallRecord>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("retry_budget", &self.retry_budget)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: impl Provider + 'static) -> Self {
        Self { provider: Box::new(provider), retry_budget: DEFAULT_RETRY_BUDGET, log: Mutex::new(Vec::new()) }
    }

    pub fn mock() -> Self {
        Self::new(MockProvider::new())
    }

    /// Provider chosen by `LLM_PROVIDER` (`mock` unless set to `remote`).
    /// The remote provider reads `LLM_ENDPOINT`, `LLM_API_KEY` and
    /// `LLM_MODEL`; the mock loads scripts from `LLM_MOCK_SCRIPTS`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let retry_budget = match std::env::var("LLM_RETRY_BUDGET") {
            Ok(raw) => raw
                .parse()
                .map_err(|_| GatewayError::ProviderUnavailable(format!("LLM_RETRY_BUDGET `{raw}` is not a count")))?,
            Err(_) => DEFAULT_RETRY_BUDGET,
        };
        let gateway = match std::env::var("LLM_PROVIDER").as_deref() {
            Ok("remote") => Self::new(RemoteProvider::from_env()),
            Ok("mock") | Err(_) => match std::env::var_os("LLM_MOCK_SCRIPTS") {
                Some(dir) => Self::new(
                    MockProvider::from_dir(PathBuf::from(dir))
                        .map_err(|e| GatewayError::ProviderUnavailable(format!("mock scripts: {e}")))?,
                ),
                None => Self::mock(),
            },
            Ok(other) => return Err(GatewayError::ProviderUnavailable(format!("unknown LLM_PROVIDER `{other}`"))),
        };
        Ok(gateway.with_retry_budget(retry_budget))
    }

    pub fn with_retry_budget(mut self, retry_budget: u32) -> Self {
        self.retry_budget = retry_budget;
        self
    }

    pub fn retry_budget(&self) -> u32 {
        self.retry_budget
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// One provider call. Parameters outside the production contract are
    /// rejected before the provider is reached.
    pub fn complete(&self, prompt: &PromptDocument, params: &InferenceParams) -> Result<String, GatewayError> {
        if !params.is_production() {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} zero_shot {} max_output_tokens {}",
                params.temperature, params.zero_shot, params.max_output_tokens
            )));
        }
        let started_at = Utc::now();
        let result = self.provider.complete(prompt, params);
        let outcome = match &result {
            Ok(text) => CallOutcome::Completed { output_digest: hex::encode(Sha256::digest(text.as_bytes())) },
            Err(error) => CallOutcome::Failed { error: error.clone() },
        };
        let mut log = self.log.lock().expect("call log lock");
        let seq = log.len() as u64;
        log.push(CallRecord {
            seq,
            provider: self.provider.name().to_string(),
            prompt_digest: prompt_digest(prompt),
            params: *params,
            started_at,
            outcome,
        });
        result
    }

    /// Completes and validates, re-completing at most `retry_budget` times
    /// while the validator reports violations. Provider errors surface at
    /// once.
    pub fn complete_validated<T>(
        &self,
        prompt: &PromptDocument,
        params: &InferenceParams,
        validate: impl Fn(&str) -> Result<T, Vec<Violation>>,
    ) -> Result<Validated<T>, GenerationError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let raw = self.complete(prompt, params)?;
            match validate(&raw) {
                Ok(value) => return Ok(Validated { value, raw, attempts }),
                Err(violations) if attempts > self.retry_budget => {
                    return Err(GenerationError::Rejected { violations, attempts })
                }
                Err(violations) => {
                    tracing::debug!(attempts, count = violations.len(), "completion rejected, retrying");
                }
            }
        }
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().expect("call log lock").clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().expect("call log lock").len()
    }
}
