//! Numeric PDDL tooling: parsing, syntax checking with model-facing feedback,
//! plan validation, a small planner, action retrieval, LLM-driven domain
//! generation and evaluation.

pub mod checker;
pub mod complexity;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod eval;
pub mod generation;
pub mod llm;
pub mod pddl;
pub mod pipeline;
pub mod planner;
pub mod retrieval;
pub mod validator;
