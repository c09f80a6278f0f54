use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llm::count_request;

pub const EMBEDDING_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider error: {0}")]
    Provider(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([a-z]+)\d*\]|[a-z0-9]+").unwrap())
}

/// Hashed bag-of-tokens vector. Placeholders count as their kind, so
/// `[position1]` and `[position2]` share a bucket.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: EMBEDDING_DIM }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(head) % self.dim as u64) as usize
    }

    pub fn tokens(text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        token_pattern()
            .captures_iter(&lower)
            .map(|c| match c.get(1) {
                Some(kind) => format!("[{}]", kind.as_str()),
                None => c[0].to_string(),
            })
            .collect()
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let tokens = HashingEmbedder::tokens(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEmbedderConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    pub dimension: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "SPAR_EMBEDDING_API_KEY".into()
}

fn default_timeout() -> u64 {
    60
}

/// Remote provider: POST `{model, input}`, answer `{vector}` or the
/// OpenAI-style `{data: [{embedding}]}`.
pub struct HttpEmbedder {
    cfg: HttpEmbedderConfig,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(cfg: HttpEmbedderConfig) -> Result<Self, EmbedError> {
        let key = std::env::var(&cfg.api_key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        Ok(HttpEmbedder { cfg, key, client })
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        count_request();
        let mut req = self.client.post(&self.cfg.url).json(&serde_json::json!({
            "model": self.cfg.model,
            "input": text,
        }));
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError::Provider(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EmbedError::Provider(format!("status {}", resp.status())));
        }
        let value: serde_json::Value = resp.json().map_err(|e| EmbedError::Provider(e.to_string()))?;
        let array = value
            .get("vector")
            .or_else(|| value.pointer("/data/0/embedding"))
            .and_then(|v| v.as_array())
            .ok_or_else(|| EmbedError::Provider("response has no `vector`".into()))?;
        let v: Vec<f64> = array.iter().filter_map(serde_json::Value::as_f64).collect();
        if v.len() != self.cfg.dimension || v.len() != array.len() {
            return Err(EmbedError::Provider(format!("expected {} numbers, got {}", self.cfg.dimension, array.len())));
        }
        Ok(v)
    }
}
