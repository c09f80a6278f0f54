//! Chat-completion backends: an OpenAI-style HTTP client and a scripted mock
//! that replays responses from a fixture file.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

static NETWORK_REQUESTS: AtomicUsize = AtomicUsize::new(0);

/// Number of outbound HTTP requests issued by this process so far.
pub fn network_requests() -> usize {
    NETWORK_REQUESTS.load(Ordering::SeqCst)
}

pub(crate) fn count_request() {
    NETWORK_REQUESTS.fetch_add(1, Ordering::SeqCst);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams { temperature: 0.0, max_tokens: 2048 }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("http error: {0}")]
    Http(String),
    #[error("unexpected response shape: {0}")]
    Response(String),
    #[error("scripted backend has no response left for call {0}")]
    ScriptExhausted(usize),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("{0}")]
    Other(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, messages: &[Message], params: &CompletionParams) -> Result<String, LlmError>;
}

/// Replays a fixed list of responses in order and records every request.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    calls: Mutex<Vec<Vec<Message>>>,
}

#[derive(Debug, Deserialize)]
struct ScriptFile {
    responses: Vec<String>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Loads `{"responses": ["...", ...]}`.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Other(format!("{}: {e}", path.display())))?;
        let script: ScriptFile =
            serde_json::from_str(&text).map_err(|e| LlmError::Other(format!("{}: {e}", path.display())))?;
        Ok(ScriptedBackend::new(script.responses))
    }

    pub fn calls(&self) -> Vec<Vec<Message>> {
        self.calls.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().unwrap().len()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, messages: &[Message], _params: &CompletionParams) -> Result<String, LlmError> {
        let mut calls = self.calls.lock().unwrap();
        calls.push(messages.to_vec());
        let n = calls.len();
        self.responses.lock().unwrap().pop_front().ok_or(LlmError::ScriptExhausted(n))
    }
}

/// Settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_key_env() -> String {
    "SPAR_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

pub struct HttpBackend {
    cfg: HttpBackendConfig,
    key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&cfg.api_key_env).map_err(|_| LlmError::MissingCredential(cfg.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Http(e.to_string()))?;
        Ok(HttpBackend { cfg, key, client })
    }

    fn once(&self, body: &serde_json::Value) -> Result<String, (bool, LlmError)> {
        count_request();
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| (true, LlmError::Http(e.to_string())))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            let text = resp.text().unwrap_or_default();
            return Err((retry, LlmError::Http(format!("{status}: {}", text.chars().take(200).collect::<String>()))));
        }
        let value: serde_json::Value = resp.json().map_err(|e| (false, LlmError::Response(e.to_string())))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| (false, LlmError::Response("no choices[0].message.content".into())))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, messages: &[Message], params: &CompletionParams) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut attempt = 0;
        loop {
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err((true, e)) if attempt < self.cfg.max_retries => {
                    attempt += 1;
                    warn!(attempt, error = %e, "completion failed; retrying");
                    std::thread::sleep(Duration::from_millis(500 * u64::from(attempt)));
                }
                Err((_, e)) => {
                    debug!(error = %e, "completion failed");
                    return Err(e);
                }
            }
        }
    }
}

/// First integer in `text` lying in `1..=n`.
pub fn parse_choice(text: &str, n: usize) -> Option<usize> {
    let mut digits = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_ascii_digit() {
            digits.push(c);
        } else if !digits.is_empty() {
            if let Ok(v) = digits.parse::<usize>() {
                if (1..=n).contains(&v) {
                    return Some(v);
                }
            }
            digits.clear();
        }
    }
    None
}
