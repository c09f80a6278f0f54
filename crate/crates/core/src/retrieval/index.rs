use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::llm::{parse_choice, CompletionParams, LlmBackend, Message};

/// Coarse-stage shortlist size.
pub const DEFAULT_K: usize = 5;

const FORMAT_TAG: &str = "spar-action-index";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCard {
    pub domain_id: String,
    pub action_name: String,
    pub description: String,
    pub abstracted: String,
    /// Ground-truth PDDL of the action, including the fluent declarations it uses.
    pub pddl_body: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("embedding has dimension {got}, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding of {0} has zero norm")]
    ZeroVector(String),
    #[error("no eligible cards after exclusion")]
    NoEligibleCards,
    #[error("K must be at least 1")]
    ZeroK,
    #[error("index file: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub dimension: usize,
    pub cards: Vec<ActionCard>,
    /// Domains whose cards are never returned.
    #[serde(skip)]
    pub exclusion: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    dimension: usize,
    cards: Vec<ActionCard>,
}

#[derive(Debug, Clone, Copy)]
pub struct Scored<'a> {
    pub card: &'a ActionCard,
    pub similarity: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let norm = dot(v, v).sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

impl Index {
    pub fn new(dimension: usize) -> Self {
        Index { dimension, cards: Vec::new(), exclusion: BTreeSet::new() }
    }

    /// Adds a card, storing its embedding L2-normalized.
    pub fn add(&mut self, mut card: ActionCard) -> Result<(), IndexError> {
        if card.embedding.len() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, got: card.embedding.len() });
        }
        card.embedding = normalized(&card.embedding)
            .ok_or_else(|| IndexError::ZeroVector(format!("{}/{}", card.domain_id, card.action_name)))?;
        self.cards.push(card);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn with_exclusion<S: Into<String>>(mut self, ids: impl IntoIterator<Item = S>) -> Self {
        self.exclusion = ids.into_iter().map(Into::into).collect();
        self
    }

    /// Top-K cards by cosine similarity, honoring `self.exclusion`.
    pub fn query_coarse(&self, query: &[f64], k: usize) -> Result<Vec<Scored<'_>>, IndexError> {
        self.query_excluding(query, k, &self.exclusion)
    }

    /// Top-K with an explicit exclusion set. Ties are broken by
    /// `(domain_id, action_name)`.
    pub fn query_excluding(
        &self,
        query: &[f64],
        k: usize,
        exclusion: &BTreeSet<String>,
    ) -> Result<Vec<Scored<'_>>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, got: query.len() });
        }
        let q = normalized(query).ok_or_else(|| IndexError::ZeroVector("query".into()))?;
        let mut scored: Vec<Scored> = self
            .cards
            .iter()
            .filter(|c| !exclusion.contains(&c.domain_id))
            .map(|c| Scored { card: c, similarity: dot(&q, &c.embedding) })
            .collect();
        if scored.is_empty() {
            return Err(IndexError::NoEligibleCards);
        }
        scored.sort_by(|a, b| {
            b.similarity
                .partial_cmp(&a.similarity)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.card.domain_id.cmp(&b.card.domain_id))
                .then_with(|| a.card.action_name.cmp(&b.card.action_name))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let file = IndexFile {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            dimension: self.dimension,
            cards: self.cards.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| IndexError::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Index, IndexError> {
        let text = std::fs::read_to_string(path)?;
        let file: IndexFile = serde_json::from_str(&text).map_err(|e| IndexError::Format(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(IndexError::Format(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported version {}", file.version)));
        }
        let mut idx = Index::new(file.dimension);
        for card in file.cards {
            idx.add(card)?;
        }
        Ok(idx)
    }
}

/// Outcome of the fine stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reranked {
    /// Position in the candidate list.
    pub choice: usize,
    /// True when the model answer was unusable and coarse rank 1 was kept.
    pub fell_back: bool,
}

pub fn rerank_prompt(candidates: &[&ActionCard], query_desc: &str) -> String {
    let mut s = format!("Target action description:\n{}\n\nCandidate example actions:\n", query_desc.trim());
    for (i, c) in candidates.iter().enumerate() {
        s.push_str(&format!("{}. {}\n", i + 1, c.description.trim()));
    }
    s.push_str(
        "\nWhich candidate describes the action most similar in meaning to the target? \
Answer with the candidate number only.",
    );
    s
}

/// Lets the backend pick one candidate using the raw (non-abstracted)
/// descriptions. Falls back to the first candidate on failure.
pub fn rerank_fine(
    candidates: &[&ActionCard],
    query_desc: &str,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Reranked {
    assert!(!candidates.is_empty(), "rerank needs at least one candidate");
    if candidates.len() == 1 {
        return Reranked { choice: 0, fell_back: false };
    }
    let prompt = rerank_prompt(candidates, query_desc);
    match backend.complete(&[Message::user(prompt)], params) {
        Ok(answer) => match parse_choice(&answer, candidates.len()) {
            Some(n) => Reranked { choice: n - 1, fell_back: false },
            None => {
                warn!(answer = %answer.chars().take(60).collect::<String>(), "unusable rerank answer");
                Reranked { choice: 0, fell_back: true }
            }
        },
        Err(e) => {
            warn!(error = %e, "rerank failed; keeping coarse rank 1");
            Reranked { choice: 0, fell_back: true }
        }
    }
}
