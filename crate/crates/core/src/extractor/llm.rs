//! Chat-completion transport.
//!
//! Requests are `POST {model, messages, temperature: 0}`; the answer text is
//! read from `choices[0].message.content`. Any hosted or local server that
//! speaks this shape can act as the structuring model.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const API_KEY_ENV: &str = "ERPA_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    pub max_retries: u32,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Upper bound on simultaneous requests to the endpoint.
    pub max_concurrency: usize,
}

impl LlmSettings {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            max_retries: 2,
            api_key: None,
            timeout: Duration::from_secs(60),
            max_concurrency: 4,
        }
    }

    /// Picks up the bearer token from `ERPA_LLM_API_KEY` when set.
    pub fn with_env_api_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("LLM endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("LLM endpoint returned HTTP {0}")]
    Http(u16),
    #[error("LLM response has no choices[0].message.content: {0}")]
    BadResponse(String),
}

struct Gate {
    in_use: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_use.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_use.lock().unwrap_or_else(|p| p.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmClient {
    settings: LlmSettings,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("endpoint", &self.settings.endpoint)
            .field("model", &self.settings.model)
            .finish()
    }
}

impl LlmClient {
    pub fn new(settings: LlmSettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate {
            in_use: Mutex::new(0),
            freed: Condvar::new(),
            cap: settings.max_concurrency.max(1),
        };
        Self {
            settings,
            agent,
            gate,
        }
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    /// Sends the conversation and returns the model's reply text.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let _slot = self.gate.acquire();
        let body = ChatRequest {
            model: &self.settings.model,
            messages,
            temperature: 0.0,
        };
        let mut req = self
            .agent
            .post(&self.settings.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.settings.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Http(status));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| TransportError::BadResponse(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::BadResponse(text.chars().take(200).collect()))
    }
}
