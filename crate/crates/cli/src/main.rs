use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use spar_core::checker::{check_domain_text, Extern};
use spar_core::complexity::{complexity_report, Weights};
use spar_core::config::{BackendKind, ToolkitConfig};
use spar_core::corpus::{load_manifest, Corpus, CorpusOracle};
use spar_core::diagnostics::{Diagnostic, DiagnosticRecord};
use spar_core::generation::{MethodPreset, Retriever};
use spar_core::llm::{network_requests, HttpBackend, LlmBackend, ScriptedBackend};
use spar_core::pddl::rational::parse_decimal;
use spar_core::pddl::{parse_domain, parse_plan, parse_problem, render_plan};
use spar_core::pipeline::{build_index, evaluate_dir, parallel_map, run_domain, write_report, write_run};
use spar_core::retrieval::{abstract_description, Index, RuleAbstractor, VerbLexicon};
use spar_core::validator::validate_plan;

/// Writes to stdout, propagating errors (a closed pipe ends the command
/// instead of panicking).
macro_rules! out {
    ($($arg:tt)*) => { write!(std::io::stdout(), $($arg)*)? };
}

macro_rules! outln {
    ($($arg:tt)*) => { writeln!(std::io::stdout(), $($arg)*)? };
}

#[derive(Parser)]
#[command(name = "spar", version, about = "Generate, check and evaluate numeric PDDL domains")]
struct Cli {
    /// Toolkit config file (see spar.example.toml)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,

    /// Log verbosity (-v info, -vv debug); logs go to stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain, or a problem against its domain, for syntax errors
    Check {
        file: PathBuf,
        /// Treat FILE as a problem of this domain
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Restrict types and requirements to this declaration file
        #[arg(long = "extern")]
        ext: Option<PathBuf>,
    },
    /// Print the complexity components, score and class of a domain
    Complexity {
        file: PathBuf,
        /// `unit` or a weights file of `name = value` lines
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        threshold: Option<String>,
    },
    /// Simulate a plan and report the first failing step
    Validate { domain: PathBuf, problem: PathBuf, plan: PathBuf },
    /// Solve a problem with the configured engine
    Solve {
        domain: PathBuf,
        problem: PathBuf,
        /// Write the plan here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the action index of a corpus
    Index {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query an action index with a description
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        description: String,
        /// Domain ids whose cards are skipped
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate one corpus domain and its problems
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest entry id
        #[arg(long)]
        domain: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate generated domains against the corpus
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of generated bundles
        #[arg(long)]
        generated: PathBuf,
        /// Report directory (defaults to the generated directory)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Corpus utilities
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Generate every corpus domain and its problems, then evaluate
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Load the manifest and check every file and reference plan
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// format | fcot | fs | ours
    #[arg(long)]
    preset: Option<String>,
    /// mock | http
    #[arg(long)]
    backend: Option<String>,
    /// Response script for the mock backend
    #[arg(long)]
    script: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("SPAR_LOG").unwrap_or_else(|_| EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_diagnostics(diags: &[Diagnostic], json: bool) -> Result<()> {
    if json {
        let records: Vec<DiagnosticRecord> = diags.iter().map(DiagnosticRecord::from).collect();
        outln!("{}", serde_json::to_string_pretty(&records).expect("records serialize"));
    } else {
        for d in diags {
            outln!("{d}");
            if !d.suggestion.is_empty() {
                outln!("    hint: {}", d.suggestion);
            }
        }
    }
    Ok(())
}

fn format_errors(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

fn load_config(cli: &Cli) -> Result<ToolkitConfig> {
    match &cli.config {
        Some(p) => ToolkitConfig::load(p).map_err(|e| anyhow!("config: {e}")),
        None => Ok(ToolkitConfig::default()),
    }
}

/// Applies flag overrides and validates before any work starts.
fn resolve(cfg: &mut ToolkitConfig, run: &RunArgs, jobs: Option<usize>) -> Result<MethodPreset> {
    if let Some(p) = &run.preset {
        cfg.generation.preset = MethodPreset::parse(p).ok_or_else(|| anyhow!("unknown preset `{p}`"))?;
    }
    if let Some(b) = &run.backend {
        cfg.backend.kind = match b.as_str() {
            "mock" => BackendKind::Mock,
            "http" => BackendKind::Http,
            other => bail!("unknown backend `{other}` (expected mock or http)"),
        };
    }
    if run.script.is_some() {
        cfg.backend.script = run.script.clone();
    }
    if let Some(n) = run.max_iter {
        cfg.generation.max_iter = n;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(|e| anyhow!("config: {e}"))?;
    Ok(cfg.generation.preset)
}

fn make_backend(cfg: &ToolkitConfig, corpus: &Corpus) -> Result<Box<dyn LlmBackend>> {
    Ok(match cfg.backend.kind {
        BackendKind::Mock => match &cfg.backend.script {
            Some(p) => Box::new(ScriptedBackend::from_file(p)?),
            None => Box::new(CorpusOracle::new(corpus)),
        },
        BackendKind::Http => {
            let http = cfg.backend.http.clone().ok_or_else(|| anyhow!("backend.http is not configured"))?;
            Box::new(HttpBackend::new(http)?)
        }
    })
}

fn cmd_check(file: &Path, domain: Option<&Path>, ext: Option<&Path>, json: bool) -> Result<ExitCode> {
    let text = read(file)?;
    let diags = match domain {
        Some(d) => {
            let dom = parse_domain(&read(d)?)
                .map_err(|e| anyhow!("domain {} does not parse:\n{}", d.display(), format_errors(&e)))?;
            parse_problem(&text, &dom).err().unwrap_or_default()
        }
        None => {
            let ext = match ext {
                Some(p) => Some(Extern::parse(&read(p)?).map_err(|e| anyhow!("extern: {}", format_errors(&e)))?),
                None => None,
            };
            check_domain_text(&text, ext.as_ref()).err().unwrap_or_default()
        }
    };
    print_diagnostics(&diags, json)?;
    if !json && diags.is_empty() {
        outln!("{}: ok", file.display());
    }
    Ok(if diags.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_complexity(
    cfg: &ToolkitConfig,
    file: &Path,
    weights: Option<&str>,
    threshold: Option<&str>,
    json: bool,
) -> Result<()> {
    let dom =
        parse_domain(&read(file)?).map_err(|e| anyhow!("{} does not parse:\n{}", file.display(), format_errors(&e)))?;
    let w = match weights {
        None => cfg.weights()?,
        Some("unit") => Weights::unit(),
        Some(path) => Weights::parse(&read(Path::new(path))?)?,
    };
    let t = match threshold {
        Some(t) => parse_decimal(t).ok_or_else(|| anyhow!("threshold `{t}` is not a decimal number"))?,
        None => cfg.threshold()?,
    };
    let report = complexity_report(&dom, &w, &t);
    if json {
        outln!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        outln!("{report}");
    }
    Ok(())
}

fn cmd_validate(domain: &Path, problem: &Path, plan: &Path, json: bool) -> Result<ExitCode> {
    let dom = parse_domain(&read(domain)?).map_err(|e| anyhow!("domain does not parse:\n{}", format_errors(&e)))?;
    let prob =
        parse_problem(&read(problem)?, &dom).map_err(|e| anyhow!("problem does not parse:\n{}", format_errors(&e)))?;
    let plan = parse_plan(&read(plan)?)?;
    let report = validate_plan(&dom, &prob, &plan);
    if json {
        outln!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        outln!("{report}");
    }
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_solve(cfg: &ToolkitConfig, domain: &Path, problem: &Path, out: Option<&Path>, json: bool) -> Result<ExitCode> {
    let dom = parse_domain(&read(domain)?).map_err(|e| anyhow!("domain does not parse:\n{}", format_errors(&e)))?;
    let prob =
        parse_problem(&read(problem)?, &dom).map_err(|e| anyhow!("problem does not parse:\n{}", format_errors(&e)))?;
    let result = cfg.engine().solve(&dom, &prob)?;
    if let (Some(path), Some(plan)) = (out, result.plan()) {
        std::fs::write(path, render_plan(plan)).with_context(|| format!("writing {}", path.display()))?;
    }
    if json {
        outln!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        match result.plan() {
            Some(plan) => out!("{}", render_plan(plan)),
            None => outln!("no plan: {:?}", result.outcome),
        }
        eprintln!("expanded {} states in {:?}", result.stats.expanded, result.stats.duration);
    }
    Ok(if result.plan().is_some() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn load_corpus(manifest: &Path) -> Result<Corpus> {
    load_manifest(manifest).map_err(|e| anyhow!("corpus: {e}"))
}

fn cmd_index(cfg: &ToolkitConfig, manifest: &Path, out: &Path, json: bool) -> Result<()> {
    let corpus = load_corpus(manifest)?;
    let embedder = cfg.embedder()?;
    let index = build_index(&corpus, embedder.as_ref(), None)?;
    index.save(out)?;
    if json {
        outln!("{}", json!({ "cards": index.len(), "dimension": index.dimension, "path": out }));
    } else {
        outln!("indexed {} actions into {}", index.len(), out.display());
    }
    Ok(())
}

fn cmd_retrieve(
    cfg: &ToolkitConfig,
    index: &Path,
    description: &str,
    exclude: &[String],
    k: Option<usize>,
    json: bool,
) -> Result<()> {
    let index = Index::load(index)?;
    let embedder = cfg.embedder()?;
    let rules = RuleAbstractor::default();
    let (abstracted, _) = abstract_description(description, &VerbLexicon::default(), &rules, &rules);
    let query = embedder.embed(&abstracted)?;
    let exclusion = exclude.iter().cloned().collect();
    let top = index.query_excluding(&query, k.unwrap_or(cfg.generation.k), &exclusion)?;
    if json {
        let rows: Vec<_> = top
            .iter()
            .map(|s| json!({ "domain_id": s.card.domain_id, "action_name": s.card.action_name, "similarity": s.similarity }))
            .collect();
        outln!("{}", json!({ "abstracted": abstracted, "results": rows }));
    } else {
        outln!("abstracted: {abstracted}");
        for (i, s) in top.iter().enumerate() {
            outln!("{:>2}. {:.4}  {}/{}", i + 1, s.similarity, s.card.domain_id, s.card.action_name);
        }
    }
    Ok(())
}

struct Session {
    corpus: Corpus,
    backend: Box<dyn LlmBackend>,
    index: Option<Index>,
    embedder: Box<dyn spar_core::retrieval::Embedder>,
}

fn open_session(cfg: &ToolkitConfig, manifest: &Path, preset: MethodPreset) -> Result<Session> {
    let corpus = load_corpus(manifest)?;
    let backend = make_backend(cfg, &corpus)?;
    let embedder = cfg.embedder()?;
    let index = if preset.uses_retrieval() { Some(build_index(&corpus, embedder.as_ref(), None)?) } else { None };
    Ok(Session { corpus, backend, index, embedder })
}

fn cmd_generate(mut cfg: ToolkitConfig, manifest: &Path, domain: &str, run: &RunArgs, json: bool) -> Result<ExitCode> {
    let preset = resolve(&mut cfg, run, None)?;
    let s = open_session(&cfg, manifest, preset)?;
    let entry = s.corpus.get(domain).ok_or_else(|| anyhow!("no domain `{domain}` in the manifest"))?;
    let retriever = s.index.as_ref().map(|index| Retriever {
        index,
        embedder: s.embedder.as_ref(),
        abstractor: None,
        rerank_backend: Some(s.backend.as_ref()),
    });
    let result = run_domain(entry, preset, s.backend.as_ref(), retriever.as_ref(), &cfg.generation_options())?;
    write_run(&run.out, entry, &result)?;
    let ok = result.status.complete && result.status.problem_failures.is_empty();
    if json {
        outln!("{}", serde_json::to_string_pretty(&result.status)?);
    } else {
        outln!(
            "{}: {} actions, {} needs-human, {} problem failures -> {}",
            entry.domain_id,
            result.generated.domain.actions.len(),
            result.status.needs_human.len(),
            result.status.problem_failures.len(),
            run.out.join(&entry.domain_id).display()
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_evaluate(
    cfg: &ToolkitConfig,
    manifest: &Path,
    generated: &Path,
    out: Option<&Path>,
    jobs: Option<usize>,
    json: bool,
) -> Result<()> {
    let corpus = load_corpus(manifest)?;
    let report = evaluate_dir(
        &corpus,
        generated,
        &cfg.engine(),
        &cfg.weights()?,
        &cfg.threshold()?,
        None,
        jobs.unwrap_or(cfg.jobs),
    )?;
    let (json_path, _) = write_report(out.unwrap_or(generated), &report)?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        out!("{}", report.render_text());
        outln!("\nreport written to {}", json_path.display());
    }
    Ok(())
}

fn cmd_corpus_validate(manifest: &Path, json: bool) -> Result<()> {
    let corpus = load_corpus(manifest)?;
    let plans: usize = corpus.entries.iter().flat_map(|e| &e.problems).filter(|p| p.gt_plan.is_some()).count();
    if json {
        let ids: Vec<_> = corpus.entries.iter().map(|e| &e.domain_id).collect();
        outln!("{}", json!({ "domains": ids, "verified_plans": plans }));
    } else {
        for e in &corpus.entries {
            outln!(
                "{:<16}{:?}  {} actions, {} problems",
                e.domain_id,
                e.category,
                e.domain.actions.len(),
                e.problems.len()
            );
        }
        outln!("ok: {} domains, {plans} reference plans verified", corpus.entries.len());
    }
    Ok(())
}

fn cmd_pipeline(
    mut cfg: ToolkitConfig,
    manifest: &Path,
    run: &RunArgs,
    jobs: Option<usize>,
    json: bool,
) -> Result<ExitCode> {
    let started = Instant::now();
    let preset = resolve(&mut cfg, run, jobs)?;
    if cfg.backend.script.is_some() {
        // Scripted responses are consumed in call order.
        cfg.jobs = 1;
    }
    let s = open_session(&cfg, manifest, preset)?;
    let opts = cfg.generation_options();
    let retriever = s.index.as_ref().map(|index| Retriever {
        index,
        embedder: s.embedder.as_ref(),
        abstractor: None,
        rerank_backend: Some(s.backend.as_ref()),
    });
    let runs = parallel_map(&s.corpus.entries, cfg.jobs, |e| {
        run_domain(e, preset, s.backend.as_ref(), retriever.as_ref(), &opts)
    });
    let mut stages = Vec::new();
    let mut all_ok = true;
    for (entry, r) in s.corpus.entries.iter().zip(runs) {
        match r {
            Ok(result) => {
                write_run(&run.out, entry, &result)?;
                let ok = result.status.complete && result.status.problem_failures.is_empty();
                all_ok &= ok;
                stages.push(json!({
                    "domain": entry.domain_id,
                    "generate": if result.status.complete { "ok" } else { "partial" },
                    "needs_human": result.status.needs_human,
                    "problems": if result.status.problem_failures.is_empty() { "ok" } else { "partial" },
                    "problem_failures": result.status.problem_failures,
                }));
            }
            Err(e) => {
                all_ok = false;
                stages.push(json!({ "domain": entry.domain_id, "generate": "failed", "error": e.to_string() }));
            }
        }
    }
    let report = evaluate_dir(
        &s.corpus,
        &run.out,
        &cfg.engine(),
        &cfg.weights()?,
        &cfg.threshold()?,
        Some(preset.as_str().to_string()),
        cfg.jobs,
    )?;
    let (report_path, _) = write_report(&run.out, &report)?;
    let summary = json!({
        "preset": preset.as_str(),
        "report": report_path,
        "stages": stages,
        "network_requests": network_requests(),
        "elapsed_secs": started.elapsed().as_secs_f64(),
        "success": all_ok,
    });
    let summary_path = run.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        out!("{}", report.render_text());
        outln!("\nnetwork requests: {}", network_requests());
        outln!("report written to {}", report_path.display());
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let json = cli.json;
    match &cli.command {
        Command::Check { file, domain, ext } => cmd_check(file, domain.as_deref(), ext.as_deref(), json),
        Command::Complexity { file, weights, threshold } => {
            cmd_complexity(&cfg, file, weights.as_deref(), threshold.as_deref(), json).map(|_| ExitCode::SUCCESS)
        }
        Command::Validate { domain, problem, plan } => cmd_validate(domain, problem, plan, json),
        Command::Solve { domain, problem, out } => cmd_solve(&cfg, domain, problem, out.as_deref(), json),
        Command::Index { manifest, out } => cmd_index(&cfg, manifest, out, json).map(|_| ExitCode::SUCCESS),
        Command::Retrieve { index, description, exclude, k } => {
            cmd_retrieve(&cfg, index, description, exclude, *k, json).map(|_| ExitCode::SUCCESS)
        }
        Command::Generate { manifest, domain, run } => cmd_generate(cfg, manifest, domain, run, json),
        Command::Evaluate { manifest, generated, out, jobs } => {
            cmd_evaluate(&cfg, manifest, generated, out.as_deref(), *jobs, json).map(|_| ExitCode::SUCCESS)
        }
        Command::Corpus { command: CorpusCommand::Validate { manifest } } => {
            cmd_corpus_validate(manifest, json).map(|_| ExitCode::SUCCESS)
        }
        Command::Pipeline { manifest, run, jobs } => cmd_pipeline(cfg, manifest, run, *jobs, json),
    }
}
