//! Coarse-to-fine retrieval of a semantically similar example action:
//! abstract the description, embed it, take the top-K cards by cosine
//! similarity, then let a language model pick one.

mod abstraction;
mod embedding;
mod index;

pub use abstraction::{
    abstract_description, placeholder_kinds, AbstractionBackend, LlmAbstractor, RuleAbstractor, VerbLexicon,
};
pub use embedding::{EmbedError, Embedder, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig, EMBEDDING_DIM};
pub use index::{rerank_fine, rerank_prompt, ActionCard, Index, IndexError, Reranked, Scored, DEFAULT_K};
