use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendError, CompletionRequest, CompletionResponse, GatewayError};

pub const API_KEY_ENV: &str = "PHASEVO_API_KEY";

/// Chat-completions client: one user message per request.
pub struct LiveBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        LiveBackend {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
        }
    }

    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(GatewayError::MissingCredentials(API_KEY_ENV))?;
        Ok(Self::new(endpoint, model, key))
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt_text}],
            "temperature": req.temperature,
        });
        if let Some(max) = req.max_tokens {
            body["max_tokens"] = json!(max);
        }
        if let Some(seed) = req.seed_hint {
            body["seed"] = json!(seed);
        }
        body
    }
}

pub(crate) fn parse_response(body: &Value) -> Result<CompletionResponse, BackendError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Fatal(format!("response has no choices[0].message.content: {body}")))?;
    let usage = |field: &str| {
        body.pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(CompletionResponse {
        text: text.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
    })
}

impl Backend for LiveBackend {
    fn identity(&self) -> String {
        format!("live:{}@{}", self.model, self.endpoint)
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&self.request_body(req))
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {text}")));
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("invalid JSON from backend: {e}")))?;
        parse_response(&body)
    }
}
