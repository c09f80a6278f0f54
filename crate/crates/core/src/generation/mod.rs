//! Action-by-action domain generation with syntax-checker feedback.

mod prompt;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::checker::{check_action_fragment, check_domain, missing_action_diagnostic, Extern, FluentRegistry};
use crate::diagnostics::{render_feedback, Category, Code, Diagnostic, Location};
use crate::llm::{CompletionParams, LlmBackend, LlmError, Message};
use crate::pddl::sexpr::balanced_spans;
use crate::pddl::{parse_problem, render_domain, Action, Domain, Problem};
use crate::retrieval::{
    abstract_description, rerank_fine, AbstractionBackend, Embedder, Index, RuleAbstractor, VerbLexicon,
};

pub use prompt::{
    action_fragment, build_prompt, extract_fragment, format_examples, registry_listing, CotAnswer, Example,
    MethodPreset, Prompt, DESCRIPTION_LABEL, NO_FLUENTS, Q_EFFECTS, Q_OBJECTS, Q_PRECONDITIONS, TARGET_HEADER,
    WRITE_ACTION,
};

pub const DEFAULT_MAX_ITER: usize = 3;
pub const PROBLEM_HEADER: &str = "## Problem description";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationInput {
    /// Corpus id of the domain being generated; its cards are excluded from
    /// retrieval.
    pub domain_id: Option<String>,
    pub domain_description: String,
    pub action_descriptions: Vec<String>,
    pub ext: Extern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOptions {
    pub max_iter: usize,
    pub params: CompletionParams,
    pub k: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            max_iter: DEFAULT_MAX_ITER,
            params: CompletionParams::default(),
            k: crate::retrieval::DEFAULT_K,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("generation input has no action descriptions")]
    NoActions,
    #[error("preset `{0}` needs a retrieval index")]
    MissingIndex(&'static str),
    #[error("retrieval failed: {0}")]
    Retrieval(String),
    #[error("backend failure: {0}")]
    Backend(#[from] LlmError),
    #[error("problem could not be generated:\n{}", render_feedback(.0))]
    Problem(Vec<Diagnostic>),
}

/// Everything needed for the coarse-to-fine example lookup.
pub struct Retriever<'a> {
    pub index: &'a Index,
    pub embedder: &'a dyn Embedder,
    /// Abstraction model; None uses the rule-based abstractor directly.
    pub abstractor: Option<&'a dyn AbstractionBackend>,
    pub rerank_backend: Option<&'a dyn LlmBackend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub domain_id: String,
    pub action_name: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub abstracted_query: String,
    pub shortlist: Vec<Candidate>,
    pub chosen: usize,
    pub rerank_fell_back: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    /// Message added to the conversation for this attempt: the full prompt
    /// first, then feedback.
    pub request: String,
    pub completion: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ActionStatus {
    Accepted { action: String },
    NeedsHuman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTrace {
    pub index: usize,
    pub description: String,
    pub retrieval: Option<RetrievalRecord>,
    pub system: String,
    pub iterations: Vec<Iteration>,
    pub status: ActionStatus,
    /// Fluent names in the registry after this action.
    pub registry: Vec<String>,
}

impl ActionTrace {
    pub fn iterations_used(&self) -> usize {
        self.iterations.len()
    }

    pub fn corrections(&self) -> usize {
        self.iterations.iter().filter(|i| !i.diagnostics.is_empty()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub domain_id: Option<String>,
    pub preset: MethodPreset,
    pub actions: Vec<ActionTrace>,
}

impl GenerationTrace {
    /// Deterministic JSON rendering used for session logs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDomain {
    pub domain: Domain,
    /// Descriptions of actions left at needs-human; empty when complete.
    pub needs_human: Vec<usize>,
    /// Result of checking the assembled domain.
    pub diagnostics: Vec<Diagnostic>,
    pub trace: GenerationTrace,
}

impl GeneratedDomain {
    pub fn is_partial(&self) -> bool {
        !self.needs_human.is_empty()
    }
}

fn retrieve(
    retriever: &Retriever,
    description: &str,
    registry: &FluentRegistry,
    ext: &Extern,
    exclusion: &BTreeSet<String>,
    k: usize,
    params: &CompletionParams,
) -> Result<(Example, RetrievalRecord), GenerationError> {
    let fallback = RuleAbstractor::new(registry.predicates().into_iter().map(|p| p.name))
        .with_value_words(registry.functions().into_iter().map(|f| f.name))
        .with_kind_words(ext.type_names());
    let backend: &dyn AbstractionBackend = retriever.abstractor.unwrap_or(&fallback);
    let (abstracted, _) = abstract_description(description, &VerbLexicon::default(), backend, &fallback);
    let query = retriever.embedder.embed(&abstracted).map_err(|e| GenerationError::Retrieval(e.to_string()))?;
    let top =
        retriever.index.query_excluding(&query, k, exclusion).map_err(|e| GenerationError::Retrieval(e.to_string()))?;
    let cards: Vec<_> = top.iter().map(|s| s.card).collect();
    let reranked = match retriever.rerank_backend {
        Some(b) => rerank_fine(&cards, description, b, params),
        None => crate::retrieval::Reranked { choice: 0, fell_back: false },
    };
    let card = cards[reranked.choice];
    let example = Example::from_fragment(
        &format!("retrieved example ({}/{})", card.domain_id, card.action_name),
        &card.description,
        &card.pddl_body,
    )
    .map_err(GenerationError::Retrieval)?;
    let record = RetrievalRecord {
        abstracted_query: abstracted,
        shortlist: top
            .iter()
            .map(|s| Candidate {
                domain_id: s.card.domain_id.clone(),
                action_name: s.card.action_name.clone(),
                similarity: s.similarity,
            })
            .collect(),
        chosen: reranked.choice,
        rerank_fell_back: reranked.fell_back,
    };
    Ok((example, record))
}

fn duplicate_action(name: &str) -> Diagnostic {
    Diagnostic::new(
        Category::Lexical,
        Code::DuplicateDeclaration,
        Location::new(1, 1, format!("(:action {name}")),
        format!("An action named `{name}` already exists in the domain; choose a different name."),
    )
}

/// Generates one action, retrying with feedback up to `max_iter` attempts.
/// On acceptance the registry gains the action's new fluents.
#[allow(clippy::too_many_arguments)]
pub fn generate_action(
    inp: &GenerationInput,
    action_index: usize,
    registry: &mut FluentRegistry,
    taken: &BTreeSet<String>,
    preset: MethodPreset,
    examples: &[Example],
    backend: &dyn LlmBackend,
    opts: &GenerationOptions,
) -> Result<(Option<Action>, ActionTrace), GenerationError> {
    assert!(opts.max_iter >= 1, "max_iter must be at least 1");
    let description = &inp.action_descriptions[action_index];
    let prompt = build_prompt(&inp.domain_description, description, &inp.ext, registry, examples, preset);
    let mut messages = vec![Message::system(prompt.system.clone()), Message::user(prompt.user.clone())];
    let mut iterations = Vec::new();
    let mut accepted = None;
    for attempt in 1..=opts.max_iter {
        let request = messages.last().expect("conversation is never empty").content.clone();
        let completion = backend.complete(&messages, &opts.params)?;
        let diagnostics = match extract_fragment(&completion) {
            None => vec![missing_action_diagnostic(&completion)],
            Some(fragment) => match check_action_fragment(&fragment, registry, &inp.ext) {
                Ok(checked) if taken.contains(&checked.action.name) => vec![duplicate_action(&checked.action.name)],
                Ok(checked) => {
                    registry.merge(&checked.action.name, &checked.new_fluents);
                    accepted = Some(checked.action);
                    Vec::new()
                }
                Err(diags) => diags,
            },
        };
        info!(action = action_index, attempt, errors = diagnostics.len(), "generation attempt");
        messages.push(Message::assistant(completion.clone()));
        let feedback = render_feedback(&diagnostics);
        iterations.push(Iteration { request, completion, diagnostics });
        if accepted.is_some() {
            break;
        }
        messages.push(Message::user(feedback));
    }
    let status = match &accepted {
        Some(a) => ActionStatus::Accepted { action: a.name.clone() },
        None => {
            warn!(action = action_index, "left for manual fixing after {} attempts", opts.max_iter);
            ActionStatus::NeedsHuman
        }
    };
    let trace = ActionTrace {
        index: action_index,
        description: description.clone(),
        retrieval: None,
        system: prompt.system,
        iterations,
        status,
        registry: registry.entries().iter().map(|e| e.decl.name.clone()).collect(),
    };
    Ok((accepted, trace))
}

/// Generates every action in description order and assembles the domain from
/// the Extern, the accumulated fluents and the accepted actions.
pub fn generate_domain(
    inp: &GenerationInput,
    preset: MethodPreset,
    backend: &dyn LlmBackend,
    retriever: Option<&Retriever>,
    opts: &GenerationOptions,
) -> Result<GeneratedDomain, GenerationError> {
    if inp.action_descriptions.is_empty() {
        return Err(GenerationError::NoActions);
    }
    if preset.uses_retrieval() && retriever.is_none() {
        return Err(GenerationError::MissingIndex(preset.as_str()));
    }
    let exclusion: BTreeSet<String> = inp.domain_id.iter().cloned().collect();
    let mut registry = FluentRegistry::new();
    let mut actions: Vec<Action> = Vec::new();
    let mut taken = BTreeSet::new();
    let mut traces = Vec::new();
    let mut needs_human = Vec::new();
    for i in 0..inp.action_descriptions.len() {
        let (examples, record) = match (preset.uses_retrieval(), retriever) {
            (true, Some(r)) => {
                let (semantic, record) =
                    retrieve(r, &inp.action_descriptions[i], &registry, &inp.ext, &exclusion, opts.k, &opts.params)?;
                (vec![format_examples()[0].clone(), semantic], Some(record))
            }
            _ => (format_examples().to_vec(), None),
        };
        let (action, mut trace) = generate_action(inp, i, &mut registry, &taken, preset, &examples, backend, opts)?;
        trace.retrieval = record;
        match action {
            Some(a) => {
                taken.insert(a.name.clone());
                actions.push(a);
            }
            None => needs_human.push(i),
        }
        traces.push(trace);
    }
    let mut domain = Domain::new(inp.domain_id.clone().unwrap_or_else(|| "generated".into()));
    domain.requirements = inp.ext.requirements.clone();
    domain.types = inp.ext.types.clone();
    domain.predicates = registry.predicates();
    domain.functions = registry.functions();
    domain.actions = actions;
    let diagnostics = check_domain(&domain, &inp.ext);
    Ok(GeneratedDomain {
        domain,
        needs_human,
        diagnostics,
        trace: GenerationTrace { domain_id: inp.domain_id.clone(), preset, actions: traces },
    })
}

/// Prompt asking for a problem file for `dom`.
pub fn problem_prompt(dom: &Domain, description: &str) -> String {
    format!(
        "## Domain\n```pddl\n{}```\n\n{PROBLEM_HEADER}\n{}\n\nWrite the PDDL problem file for this description using \
only the predicates and functions of the domain above. Answer with a single ```pddl block.",
        render_domain(dom),
        description.trim()
    )
}

fn extract_problem(completion: &str) -> String {
    balanced_spans(completion)
        .into_iter()
        .map(|r| &completion[r])
        .find(|s| s.to_lowercase().contains("(problem"))
        .unwrap_or(completion)
        .to_string()
}

/// Asks for a problem file, allowing one feedback retry. Returns the problem
/// and the number of backend calls made.
pub fn generate_problem(
    dom: &Domain,
    description: &str,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<(Problem, usize), GenerationError> {
    let mut messages = vec![Message::user(problem_prompt(dom, description))];
    let mut last = Vec::new();
    for call in 1..=2 {
        let completion = backend.complete(&messages, params)?;
        match parse_problem(&extract_problem(&completion), dom) {
            Ok(p) => return Ok((p, call)),
            Err(diags) => {
                messages.push(Message::assistant(completion));
                messages.push(Message::user(render_feedback(&diags)));
                last = diags;
            }
        }
    }
    Err(GenerationError::Problem(last))
}
