//! Toolkit configuration file. Credentials never live here: backends name
//! the environment variable that holds their key.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::{default_threshold, Weights, WeightsError};
use crate::generation::{GenerationOptions, MethodPreset, DEFAULT_MAX_ITER};
use crate::llm::{CompletionParams, HttpBackendConfig};
use crate::pddl::rational::parse_decimal;
use crate::pddl::Rational;
use crate::planner::{Engine, ExternalSolverConfig, SearchLimits};
use crate::retrieval::{Embedder, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig, DEFAULT_K, EMBEDDING_DIM};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid setting `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("weights: {0}")]
    Weights(#[from] WeightsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Offline: a scripted response file, or the corpus oracle.
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: BackendKind,
    /// Response script for the mock backend.
    pub script: Option<PathBuf>,
    pub http: Option<HttpBackendConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    #[default]
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default)]
    pub kind: EmbeddingKind,
    #[serde(default = "default_dim")]
    pub dimension: usize,
    pub http: Option<HttpEmbedderConfig>,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection { kind: EmbeddingKind::Hashing, dimension: EMBEDDING_DIM, http: None }
    }
}

fn default_dim() -> usize {
    EMBEDDING_DIM
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_expanded")]
    pub max_expanded_states: usize,
    #[serde(default = "default_wall")]
    pub wall_clock_secs: u64,
    #[serde(default = "default_plan_len")]
    pub max_plan_length: usize,
    /// Use this external solver instead of the built-in search.
    pub external: Option<ExternalSolverConfig>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let l = SearchLimits::default();
        SolverSection {
            max_expanded_states: l.max_expanded_states,
            wall_clock_secs: l.wall_clock_budget.as_secs(),
            max_plan_length: l.max_plan_length,
            external: None,
        }
    }
}

fn default_expanded() -> usize {
    SearchLimits::default().max_expanded_states
}

fn default_wall() -> u64 {
    SearchLimits::default().wall_clock_budget.as_secs()
}

fn default_plan_len() -> usize {
    SearchLimits::default().max_plan_length
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySection {
    /// Decimal threshold; defaults to 5.23.
    pub threshold: Option<String>,
    /// `unit` or a path to a `name = value` weights file.
    pub weights: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    #[serde(default = "default_preset")]
    pub preset: MethodPreset,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            preset: default_preset(),
            max_iter: DEFAULT_MAX_ITER,
            k: DEFAULT_K,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

fn default_preset() -> MethodPreset {
    MethodPreset::Ours
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_max_tokens() -> u32 {
    CompletionParams::default().max_tokens
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub complexity: ComplexitySection,
    #[serde(default)]
    pub generation: GenerationSection,
    /// Domains processed in parallel.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        ToolkitConfig {
            backend: BackendSection::default(),
            embedding: EmbeddingSection::default(),
            solver: SolverSection::default(),
            complexity: ComplexitySection::default(),
            generation: GenerationSection::default(),
            jobs: default_jobs(),
        }
    }
}

fn positive(key: &'static str, v: u64) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(ConfigError::Invalid { key, message: "must be positive".into() });
    }
    Ok(())
}

impl ToolkitConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ToolkitConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        ToolkitConfig::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("solver.max_expanded_states", self.solver.max_expanded_states as u64)?;
        positive("solver.wall_clock_secs", self.solver.wall_clock_secs)?;
        positive("solver.max_plan_length", self.solver.max_plan_length as u64)?;
        positive("generation.max_iter", self.generation.max_iter as u64)?;
        positive("generation.k", self.generation.k as u64)?;
        positive("generation.max_tokens", self.generation.max_tokens as u64)?;
        positive("embedding.dimension", self.embedding.dimension as u64)?;
        positive("jobs", self.jobs as u64)?;
        if !(0.0..=2.0).contains(&self.generation.temperature) {
            return Err(ConfigError::Invalid { key: "generation.temperature", message: "must be in [0, 2]".into() });
        }
        if let Some(ext) = &self.solver.external {
            positive("solver.external.timeout_secs", ext.timeout_secs)?;
        }
        if self.backend.kind == BackendKind::Http && self.backend.http.is_none() {
            return Err(ConfigError::Invalid { key: "backend.http", message: "required when kind = \"http\"".into() });
        }
        if self.embedding.kind == EmbeddingKind::Http && self.embedding.http.is_none() {
            return Err(ConfigError::Invalid {
                key: "embedding.http",
                message: "required when kind = \"http\"".into(),
            });
        }
        self.threshold()?;
        self.weights()?;
        Ok(())
    }

    pub fn threshold(&self) -> Result<Rational, ConfigError> {
        match &self.complexity.threshold {
            None => Ok(default_threshold()),
            Some(t) => parse_decimal(t).ok_or_else(|| ConfigError::Invalid {
                key: "complexity.threshold",
                message: format!("`{t}` is not a decimal number"),
            }),
        }
    }

    pub fn weights(&self) -> Result<Weights, ConfigError> {
        match self.complexity.weights.as_deref() {
            None | Some("unit") => Ok(Weights::unit()),
            Some(path) => {
                let p = Path::new(path);
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                Ok(Weights::parse(&text)?)
            }
        }
    }

    pub fn engine(&self) -> Engine {
        match &self.solver.external {
            Some(ext) => Engine::External(ext.clone()),
            None => Engine::Builtin(SearchLimits {
                max_expanded_states: self.solver.max_expanded_states,
                wall_clock_budget: Duration::from_secs(self.solver.wall_clock_secs),
                max_plan_length: self.solver.max_plan_length,
            }),
        }
    }

    pub fn generation_options(&self) -> GenerationOptions {
        GenerationOptions {
            max_iter: self.generation.max_iter,
            params: CompletionParams {
                temperature: self.generation.temperature,
                max_tokens: self.generation.max_tokens,
            },
            k: self.generation.k,
        }
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        match (self.embedding.kind, &self.embedding.http) {
            (EmbeddingKind::Http, Some(cfg)) => Ok(Box::new(
                HttpEmbedder::new(cfg.clone())
                    .map_err(|e| ConfigError::Invalid { key: "embedding.http", message: e.to_string() })?,
            )),
            _ => Ok(Box::new(HashingEmbedder::new(self.embedding.dimension))),
        }
    }
}
