//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde_json::{json, Value};

use super::{GatewayError, InferenceParams, Provider};
use crate::pipeline::PromptDocument;

const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: Option<String>,
    api_key: Option<String>,
    model: String,
}

impl RemoteProvider {
    pub fn new(endpoint: Option<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self { endpoint, api_key, model: model.into() }
    }

    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        Self::new(var("LLM_ENDPOINT"), var("LLM_API_KEY"), var("LLM_MODEL").unwrap_or_else(|| "gpt-4o".into()))
    }
}

fn request_body(model: &str, prompt: &PromptDocument, params: &InferenceParams) -> Value {
    json!({
        "model": model,
        "temperature": params.temperature,
        "max_tokens": params.max_output_tokens,
        "messages": [
            { "role": "system", "content": prompt.system_text },
            { "role": "user", "content": prompt.user_text() },
        ],
    })
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, prompt: &PromptDocument, params: &InferenceParams) -> Result<String, GatewayError> {
        let endpoint =
            self.endpoint.as_deref().ok_or_else(|| GatewayError::ProviderUnavailable("LLM_ENDPOINT is not set".into()))?;
        let api_key =
            self.api_key.as_deref().ok_or_else(|| GatewayError::ProviderUnavailable("LLM_API_KEY is not set".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        let response = client
            .post(endpoint)
            .bearer_auth(api_key)
            .json(&request_body(&self.model, prompt, params))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    GatewayError::Timeout
                } else {
                    GatewayError::ProviderUnavailable(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(GatewayError::QuotaExceeded);
        }
        if !status.is_success() {
            return Err(GatewayError::ProviderUnavailable(format!("HTTP {status}")));
        }
        let body: Value = response.json().map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::ProviderUnavailable("response has no choices[0].message.content".into()))
    }
}
