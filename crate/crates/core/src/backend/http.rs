//! OpenAI-compatible chat-completions client.
//!
//! Speaks the `/v1/chat/completions` JSON protocol used by most local
//! serving stacks. Synchronous (the search loop is sequential by design),
//! with bounded retries and exponential backoff on transient failures
//! (connect errors, timeouts, HTTP 429 and 5xx). Thinking segments are
//! stripped from replies before they reach the caller; the delimiters are
//! configurable per model family.
//!
//! Endpoint, model name, and API key come from the environment
//! (`ARCHSEARCH_API_BASE`, `ARCHSEARCH_MODEL`, `ARCHSEARCH_API_KEY`);
//! timeout, retry, and delimiter settings can be loaded from a small TOML
//! file.

use super::{
    strip_thinking, validate_messages, BackendError, ChatBackend, ChatMessage, Role,
    SamplingParams,
};
use serde::Deserialize;
use std::path::Path;
use std::time::Duration;

/// Environment variable naming the chat-completions URL (either the full
/// `/v1/chat/completions` path or a base URL to which it is appended).
pub const ENV_API_BASE: &str = "ARCHSEARCH_API_BASE";
/// Environment variable naming the model.
pub const ENV_MODEL: &str = "ARCHSEARCH_MODEL";
/// Environment variable holding the bearer token, if the server wants one.
pub const ENV_API_KEY: &str = "ARCHSEARCH_API_KEY";

/// Tunables loadable from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub timeout_secs: u64,
    /// Total attempts per request (first try included).
    pub retries: u32,
    pub backoff_ms: u64,
    pub think_open: String,
    pub think_close: String,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            timeout_secs: 120,
            retries: 3,
            backoff_ms: 250,
            think_open: "<think>".to_string(),
            think_close: "</think>".to_string(),
        }
    }
}

impl HttpConfig {
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| BackendError::Config(e.to_string()))
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    config: HttpConfig,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, BackendError> {
        Self::with_config(endpoint, model, HttpConfig::default())
    }

    pub fn with_config(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        config: HttpConfig,
    ) -> Result<Self, BackendError> {
        let mut endpoint = endpoint.into();
        if !endpoint.contains("/chat/completions") {
            endpoint = format!("{}/v1/chat/completions", endpoint.trim_end_matches('/'));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            endpoint,
            model: model.into(),
            api_key: None,
            config,
        })
    }

    /// Build from `ARCHSEARCH_API_BASE` / `ARCHSEARCH_MODEL` /
    /// `ARCHSEARCH_API_KEY`, optionally applying a TOML config file.
    pub fn from_env(config_file: Option<&Path>) -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_API_BASE)
            .map_err(|_| BackendError::Config(format!("{ENV_API_BASE} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| BackendError::Config(format!("{ENV_MODEL} is not set")))?;
        let config = match config_file {
            Some(path) => HttpConfig::from_file(path)?,
            None => HttpConfig::default(),
        };
        let mut backend = Self::with_config(endpoint, model, config)?;
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            if !key.is_empty() {
                backend.api_key = Some(key);
            }
        }
        Ok(backend)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    fn request_body(&self, messages: &[ChatMessage], params: &SamplingParams) -> serde_json::Value {
        let rendered: Vec<serde_json::Value> = messages
            .iter()
            .map(|m| {
                serde_json::json!({
                    "role": match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    "content": m.content,
                })
            })
            .collect();
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": rendered,
            "temperature": params.temperature,
            // honored by serving stacks that gate thinking via the chat
            // template; harmlessly ignored elsewhere
            "chat_template_kwargs": { "enable_thinking": params.reasoning },
        });
        if let Some(max) = params.max_tokens {
            body["max_tokens"] = serde_json::json!(max);
        }
        body
    }

    fn send_once(
        &self,
        body: &serde_json::Value,
    ) -> Result<Result<String, Retryable>, BackendError> {
        let mut request = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Ok(Err(Retryable::Timeout)),
            Err(e) if e.is_connect() => return Ok(Err(Retryable::Transport(e.to_string()))),
            Err(e) => return Err(BackendError::Transport(e.to_string())),
        };
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Ok(Err(Retryable::Status(status.as_u16(), text)));
        }
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                message: truncate(&text, 300),
            });
        }
        Ok(Ok(text))
    }

    fn extract_content(&self, raw: &str) -> Result<String, BackendError> {
        let value: serde_json::Value = serde_json::from_str(raw)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let content = value
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str())
            .ok_or_else(|| {
                BackendError::MalformedResponse(
                    "no choices[0].message.content in response".to_string(),
                )
            })?;
        let visible = strip_thinking(content, &self.config.think_open, &self.config.think_close);
        if visible.is_empty() {
            return Err(BackendError::EmptyReply);
        }
        Ok(visible)
    }
}

enum Retryable {
    Timeout,
    Transport(String),
    Status(u16, String),
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}

impl ChatBackend for HttpBackend {
    fn chat(
        &mut self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        let body = self.request_body(messages, params);
        let attempts = self.config.retries.max(1);
        let mut last: Option<Retryable> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.send_once(&body)? {
                Ok(raw) => return self.extract_content(&raw),
                Err(retryable) => last = Some(retryable),
            }
        }
        Err(match last {
            Some(Retryable::Timeout) => BackendError::Timeout { attempts },
            Some(Retryable::Transport(msg)) => BackendError::Transport(msg),
            Some(Retryable::Status(status, message)) => BackendError::Http {
                status,
                message: truncate(&message, 300),
            },
            None => BackendError::Transport("no attempt made".to_string()),
        })
    }

    fn describe(&self) -> String {
        format!("http({} @ {})", self.model, self.endpoint)
    }
}
