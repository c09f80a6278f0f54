//! End-to-end orchestration: index a corpus, generate each domain and its
//! problems, store the results, and evaluate them against the ground truth.
//!
//! Generated output layout, one directory per domain:
//!
//! ```text
//! <out>/<domain_id>/domain.pddl
//! <out>/<domain_id>/problems/<tier>-<n>.pddl
//! <out>/<domain_id>/trace.json
//! <out>/<domain_id>/status.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::checker::FluentRegistry;
use crate::complexity::{complexity_report, Weights};
use crate::corpus::{Corpus, ManifestEntry};
use crate::eval::{evaluate_cases, tally_errors, DomainReport, ErrorCounts, EvalCase, EvaluationReport};
use crate::generation::{
    action_fragment, generate_domain, generate_problem, GeneratedDomain, GenerationError, GenerationOptions,
    GenerationTrace, MethodPreset, Retriever,
};
use crate::llm::LlmBackend;
use crate::pddl::{parse_domain, parse_problem, render_domain, render_problem, Domain, Problem, Rational};
use crate::planner::Engine;
use crate::retrieval::{
    abstract_description, AbstractionBackend, ActionCard, EmbedError, Embedder, Index, IndexError, RuleAbstractor,
    VerbLexicon,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("embedding failed for {card}: {source}")]
    Embed { card: String, source: EmbedError },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("domain `{domain}`: {source}")]
    Generation { domain: String, source: GenerationError },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Builds the action index over every action of the corpus. Descriptions
/// are abstracted by `abstractor` when given, else by rules using each
/// domain's fluent and type names.
pub fn build_index(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    abstractor: Option<&dyn AbstractionBackend>,
) -> Result<Index, PipelineError> {
    let mut index = Index::new(embedder.dimension());
    let mut lex = VerbLexicon::default();
    for e in &corpus.entries {
        let rules = RuleAbstractor::for_domain(&e.domain);
        let registry = FluentRegistry::from_domain(&e.domain);
        for (name, desc) in &e.action_descriptions {
            let (abstracted, next) = abstract_description(desc, &lex, abstractor.unwrap_or(&rules), &rules);
            lex = next;
            let card_id = format!("{}/{name}", e.domain_id);
            let embedding =
                embedder.embed(&abstracted).map_err(|source| PipelineError::Embed { card: card_id, source })?;
            let action = e.domain.action(name).expect("descriptions follow domain actions");
            index.add(ActionCard {
                domain_id: e.domain_id.clone(),
                action_name: name.clone(),
                description: desc.clone(),
                abstracted,
                pddl_body: action_fragment(action, &registry),
                embedding,
            })?;
        }
    }
    Ok(index)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStatus {
    pub domain_id: String,
    /// Every action was accepted.
    pub complete: bool,
    pub needs_human: Vec<usize>,
    /// Problem key to failure message, for problems that were not produced.
    pub problem_failures: BTreeMap<String, String>,
}

/// Output of generating one domain and its problems.
#[derive(Debug, Clone)]
pub struct DomainRun {
    pub generated: GeneratedDomain,
    /// Aligned with the corpus entry's problems.
    pub problems: Vec<Option<Problem>>,
    pub status: RunStatus,
}

pub fn run_domain(
    entry: &ManifestEntry,
    preset: MethodPreset,
    backend: &dyn LlmBackend,
    retriever: Option<&Retriever>,
    opts: &GenerationOptions,
) -> Result<DomainRun, PipelineError> {
    let generated = generate_domain(&entry.generation_input(), preset, backend, retriever, opts)
        .map_err(|source| PipelineError::Generation { domain: entry.domain_id.clone(), source })?;
    let mut problems = Vec::new();
    let mut problem_failures = BTreeMap::new();
    for p in &entry.problems {
        match generate_problem(&generated.domain, &p.description, backend, &opts.params) {
            Ok((prob, _)) => problems.push(Some(prob)),
            Err(e) => {
                warn!(domain = %entry.domain_id, problem = %p.key(), error = %e, "problem generation failed");
                problem_failures.insert(p.key(), e.to_string());
                problems.push(None);
            }
        }
    }
    info!(domain = %entry.domain_id, complete = !generated.is_partial(), "domain generated");
    let status = RunStatus {
        domain_id: entry.domain_id.clone(),
        complete: !generated.is_partial(),
        needs_human: generated.needs_human.clone(),
        problem_failures,
    };
    Ok(DomainRun { generated, problems, status })
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

pub fn write_run(out: &Path, entry: &ManifestEntry, run: &DomainRun) -> Result<(), PipelineError> {
    let dir = out.join(&entry.domain_id);
    let pdir = dir.join("problems");
    std::fs::create_dir_all(&pdir).map_err(io(&pdir))?;
    let write = |path: PathBuf, text: String| std::fs::write(&path, text).map_err(io(&path));
    write(dir.join("domain.pddl"), render_domain(&run.generated.domain))?;
    for (p, prob) in entry.problems.iter().zip(&run.problems) {
        let path = pdir.join(format!("{}.pddl", p.key()));
        match prob {
            Some(prob) => write(path, render_problem(prob))?,
            None if path.exists() => std::fs::remove_file(&path).map_err(io(&path))?,
            None => {}
        }
    }
    write(dir.join("trace.json"), run.generated.trace.to_json())?;
    write(dir.join("status.json"), serde_json::to_string_pretty(&run.status).expect("status serializes"))?;
    Ok(())
}

/// A generated bundle read back from disk. Missing or unparsable parts are
/// None.
#[derive(Debug, Clone)]
pub struct GeneratedBundle {
    pub domain: Option<Domain>,
    pub problems: Vec<Option<Problem>>,
    pub trace: Option<GenerationTrace>,
    pub complete: bool,
}

pub fn load_generated(out: &Path, entry: &ManifestEntry) -> Result<GeneratedBundle, PipelineError> {
    let dir = out.join(&entry.domain_id);
    let dpath = dir.join("domain.pddl");
    let domain = match std::fs::read_to_string(&dpath) {
        Ok(text) => match parse_domain(&text) {
            Ok(d) => Some(d),
            Err(diags) => {
                warn!(path = %dpath.display(), errors = diags.len(), "generated domain does not parse");
                None
            }
        },
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io(&dpath)(e)),
    };
    let mut problems = Vec::new();
    for p in &entry.problems {
        let path = dir.join("problems").join(format!("{}.pddl", p.key()));
        let prob = match (&domain, std::fs::read_to_string(&path)) {
            (Some(d), Ok(text)) => parse_problem(&text, d).ok(),
            _ => None,
        };
        problems.push(prob);
    }
    let tpath = dir.join("trace.json");
    let trace = match std::fs::read_to_string(&tpath) {
        Ok(text) => Some(
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Format { path: tpath.clone(), message: e.to_string() })?,
        ),
        Err(_) => None,
    };
    let spath = dir.join("status.json");
    let complete = match std::fs::read_to_string(&spath) {
        Ok(text) => {
            serde_json::from_str::<RunStatus>(&text)
                .map_err(|e| PipelineError::Format { path: spath.clone(), message: e.to_string() })?
                .complete
        }
        Err(_) => domain.is_some(),
    };
    Ok(GeneratedBundle { domain, problems, trace, complete })
}

/// Scores one domain bundle against its corpus entry.
pub fn evaluate_bundle(
    entry: &ManifestEntry,
    bundle: &GeneratedBundle,
    engine: &Engine,
    weights: &Weights,
    threshold: &Rational,
) -> DomainReport {
    let cases: Vec<EvalCase> = entry
        .problems
        .iter()
        .zip(&bundle.problems)
        .map(|(p, g)| EvalCase {
            tier: p.tier,
            index: p.index,
            gen_problem: g.as_ref(),
            gt_problem: &p.problem,
            gt_plan: p.gt_plan.as_ref(),
        })
        .collect();
    let outcomes =
        evaluate_cases(bundle.domain.as_ref(), &entry.domain, &cases, engine).expect("corpus entries have problems");
    let cx = complexity_report(&entry.domain, weights, threshold);
    let errors = bundle.trace.as_ref().map(ErrorCounts::from_trace).unwrap_or_default();
    DomainReport::new(
        &entry.domain_id,
        cx.class,
        crate::pddl::rational::to_f64(&cx.score),
        bundle.complete,
        errors,
        outcomes,
    )
}

/// Evaluates every corpus domain found under `out`.
pub fn evaluate_dir(
    corpus: &Corpus,
    out: &Path,
    engine: &Engine,
    weights: &Weights,
    threshold: &Rational,
    preset: Option<String>,
    jobs: usize,
) -> Result<EvaluationReport, PipelineError> {
    let bundles: Vec<GeneratedBundle> =
        corpus.entries.iter().map(|e| load_generated(out, e)).collect::<Result<_, _>>()?;
    let pairs: Vec<(&ManifestEntry, &GeneratedBundle)> = corpus.entries.iter().zip(&bundles).collect();
    let domains = parallel_map(&pairs, jobs, |(e, b)| evaluate_bundle(e, b, engine, weights, threshold));
    let classes: Vec<_> = domains.iter().map(|d| d.class).collect();
    let errors = tally_errors(bundles.iter().zip(classes).filter_map(|(b, c)| b.trace.as_ref().map(|t| (c, t))));
    Ok(EvaluationReport::new(preset, domains, errors))
}

pub fn write_report(out: &Path, report: &EvaluationReport) -> Result<(PathBuf, PathBuf), PipelineError> {
    std::fs::create_dir_all(out).map_err(io(out))?;
    let json = out.join("report.json");
    let text = out.join("report.txt");
    std::fs::write(&json, serde_json::to_string_pretty(report).expect("report serializes")).map_err(io(&json))?;
    std::fs::write(&text, report.render_text()).map_err(io(&text))?;
    Ok((json, text))
}
