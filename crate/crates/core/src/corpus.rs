//! Corpus loading: a manifest of domain bundles, each with nine tiered
//! problems, natural-language descriptions and optional reference plans.
//!
//! Layout of one bundle, relative to the manifest directory:
//!
//! ```text
//! <dir>/domain.pddl
//! <dir>/descriptions.txt
//! <dir>/problems/{simple,medium,hard}-{1,2,3}.pddl
//! <dir>/plans/{simple,medium,hard}-{1,2,3}.plan    (optional)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{Extern, FluentRegistry};
use crate::complexity::{complexity_report, ComplexityClass, Weights};
use crate::diagnostics::{render_feedback, Diagnostic};
use crate::generation::{action_fragment, GenerationInput, PROBLEM_HEADER, TARGET_HEADER};
use crate::llm::{CompletionParams, LlmBackend, LlmError, Message, Role};
use crate::pddl::Rational;
use crate::pddl::{parse_domain, parse_plan, parse_problem, render_problem, Domain, Plan, Problem};
use crate::validator::validate_plan;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PROBLEMS_PER_TIER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Simple,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Simple, Tier::Medium, Tier::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Tier> {
        Tier::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainCategory {
    Navigation,
    Transportation,
    Manipulation,
    Monitoring,
    Exploration,
    AerialOperations,
    Adaptation,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}: parse errors:\n{}", render_feedback(.diagnostics))]
    Parse { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error("domain `{domain}` has {found} {tier} problems, expected {PROBLEMS_PER_TIER}")]
    TierCount { domain: String, tier: Tier, found: usize },
    #[error("domain `{domain}`: {message}")]
    Descriptions { domain: String, message: String },
    #[error("reference plan {path} is invalid at step {step}: {reason}")]
    PlanInvalid { path: PathBuf, step: usize, reason: String },
    #[error("domain id `{0}` appears twice")]
    DuplicateId(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    domain: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    category: DomainCategory,
    /// Bundle directory; defaults to the id.
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemEntry {
    pub tier: Tier,
    /// 1-based position within the tier.
    pub index: usize,
    pub path: PathBuf,
    pub problem: Problem,
    pub description: String,
    pub gt_plan: Option<Plan>,
}

impl ProblemEntry {
    pub fn key(&self) -> String {
        format!("{}-{}", self.tier, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub domain_id: String,
    pub category: DomainCategory,
    pub dir: PathBuf,
    pub domain: Domain,
    pub domain_description: String,
    /// Action name and description, in domain declaration order.
    pub action_descriptions: Vec<(String, String)>,
    pub ext: Extern,
    /// Ordered simple, medium, hard; by index within a tier.
    pub problems: Vec<ProblemEntry>,
}

impl ManifestEntry {
    pub fn generation_input(&self) -> GenerationInput {
        GenerationInput {
            domain_id: Some(self.domain_id.clone()),
            domain_description: self.domain_description.clone(),
            action_descriptions: self.action_descriptions.iter().map(|(_, d)| d.clone()).collect(),
            ext: self.ext.clone(),
        }
    }

    pub fn problems_in(&self, tier: Tier) -> impl Iterator<Item = &ProblemEntry> {
        self.problems.iter().filter(move |p| p.tier == tier)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.domain_id == id)
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Sections of a descriptions file: `[domain]`, `[action NAME]` and
/// `[problem TIER-N]` headers, each followed by free text. Lines starting
/// with `#` are comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Descriptions {
    pub domain: String,
    pub actions: Vec<(String, String)>,
    pub problems: BTreeMap<String, String>,
}

pub fn parse_descriptions(text: &str) -> Result<Descriptions, String> {
    let mut out = Descriptions::default();
    let mut current: Option<(String, String)> = None;
    let mut seen_domain = false;
    let flush = |cur: Option<(String, String)>, out: &mut Descriptions| -> Result<(), String> {
        let Some((header, body)) = cur else { return Ok(()) };
        let body = body.trim().to_string();
        if body.is_empty() {
            return Err(format!("section [{header}] is empty"));
        }
        let mut words = header.split_whitespace();
        match (words.next(), words.next(), words.next()) {
            (Some("domain"), None, _) => out.domain = body,
            (Some("action"), Some(name), None) => {
                if out.actions.iter().any(|(n, _)| n == name) {
                    return Err(format!("action `{name}` is described twice"));
                }
                out.actions.push((name.to_string(), body));
            }
            (Some("problem"), Some(key), None) => {
                if out.problems.insert(key.to_string(), body).is_some() {
                    return Err(format!("problem `{key}` is described twice"));
                }
            }
            _ => return Err(format!("unknown section header [{header}]")),
        }
        Ok(())
    };
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('#') {
            continue;
        }
        if t.starts_with('[') && t.ends_with(']') {
            flush(current.take(), &mut out)?;
            let header = t[1..t.len() - 1].trim().to_string();
            seen_domain |= header == "domain";
            current = Some((header, String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !t.is_empty() {
            return Err("text before the first section header".into());
        }
    }
    flush(current, &mut out)?;
    if !seen_domain {
        return Err("missing [domain] section".into());
    }
    Ok(out)
}

fn problem_files(domain: &str, dir: &Path) -> Result<Vec<(Tier, usize, PathBuf)>, CorpusError> {
    let pdir = dir.join("problems");
    let listing = std::fs::read_dir(&pdir).map_err(|source| CorpusError::Io { path: pdir.clone(), source })?;
    let mut found = Vec::new();
    for item in listing {
        let path = item.map_err(|source| CorpusError::Io { path: pdir.clone(), source })?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pddl") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let parsed = stem
            .split_once('-')
            .and_then(|(t, n)| Some((Tier::parse(t)?, n.parse::<usize>().ok()?)))
            .filter(|(_, n)| (1..=PROBLEMS_PER_TIER).contains(n));
        match parsed {
            Some((tier, n)) => found.push((tier, n, path)),
            None => {
                return Err(CorpusError::Manifest {
                    path,
                    message: format!("problem files must be named <tier>-<1..{PROBLEMS_PER_TIER}>.pddl"),
                })
            }
        }
    }
    found.sort();
    for tier in Tier::ALL {
        let count = found.iter().filter(|(t, _, _)| *t == tier).count();
        if count != PROBLEMS_PER_TIER {
            return Err(CorpusError::TierCount { domain: domain.to_string(), tier, found: count });
        }
    }
    Ok(found)
}

fn load_entry(root: &Path, raw: RawEntry) -> Result<ManifestEntry, CorpusError> {
    let dir = root.join(raw.dir.unwrap_or_else(|| PathBuf::from(&raw.id)));
    let dpath = dir.join("domain.pddl");
    let domain = parse_domain(&read(&dpath)?).map_err(|diagnostics| CorpusError::Parse { path: dpath, diagnostics })?;
    let desc = parse_descriptions(&read(&dir.join("descriptions.txt"))?)
        .map_err(|message| CorpusError::Descriptions { domain: raw.id.clone(), message })?;
    let mut action_descriptions = Vec::new();
    for a in &domain.actions {
        let text = desc.actions.iter().find(|(n, _)| *n == a.name).map(|(_, t)| t.clone()).ok_or_else(|| {
            CorpusError::Descriptions {
                domain: raw.id.clone(),
                message: format!("action `{}` has no description", a.name),
            }
        })?;
        action_descriptions.push((a.name.clone(), text));
    }
    if let Some((extra, _)) = desc.actions.iter().find(|(n, _)| domain.action(n).is_none()) {
        return Err(CorpusError::Descriptions {
            domain: raw.id.clone(),
            message: format!("description for unknown action `{extra}`"),
        });
    }
    let mut problems = Vec::new();
    for (tier, index, path) in problem_files(&raw.id, &dir)? {
        let key = format!("{tier}-{index}");
        let problem = parse_problem(&read(&path)?, &domain)
            .map_err(|diagnostics| CorpusError::Parse { path: path.clone(), diagnostics })?;
        let description = desc.problems.get(&key).cloned().ok_or_else(|| CorpusError::Descriptions {
            domain: raw.id.clone(),
            message: format!("problem `{key}` has no description"),
        })?;
        let plan_path = dir.join("plans").join(format!("{key}.plan"));
        let gt_plan = if plan_path.exists() {
            let plan = parse_plan(&read(&plan_path)?)
                .map_err(|e| CorpusError::Manifest { path: plan_path.clone(), message: e.to_string() })?;
            let report = validate_plan(&domain, &problem, &plan);
            if let Some(step) = report.failed_step() {
                let reason = match &report.outcome {
                    crate::validator::Outcome::FailedAt { reason, .. } => reason.to_string(),
                    crate::validator::Outcome::Valid => unreachable!("failed_step implies failure"),
                };
                return Err(CorpusError::PlanInvalid { path: plan_path, step, reason });
            }
            Some(plan)
        } else {
            None
        };
        problems.push(ProblemEntry { tier, index, path, problem, description, gt_plan });
    }
    Ok(ManifestEntry {
        domain_id: raw.id,
        category: raw.category,
        ext: Extern::from_domain(&domain),
        dir,
        domain_description: desc.domain,
        action_descriptions,
        domain,
        problems,
    })
}

/// Loads and cross-validates a corpus. `path` is the manifest file or the
/// directory holding `manifest.toml`.
pub fn load_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest: ManifestFile = toml::from_str(&read(&file)?)
        .map_err(|e| CorpusError::Manifest { path: file.clone(), message: e.to_string() })?;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for raw in manifest.domain {
        if entries.iter().any(|e| e.domain_id == raw.id) {
            return Err(CorpusError::DuplicateId(raw.id));
        }
        entries.push(load_entry(&root, raw)?);
    }
    Ok(Corpus { root, entries })
}

/// Stable partition of `entries` into simple and complex domains.
pub fn split_by_complexity<'a>(
    entries: &'a [ManifestEntry],
    weights: &Weights,
    threshold: &Rational,
) -> (Vec<&'a ManifestEntry>, Vec<&'a ManifestEntry>) {
    entries.iter().partition(|e| complexity_report(&e.domain, weights, threshold).class == ComplexityClass::Simple)
}

/// Offline backend that answers from the corpus ground truth: the reference
/// action for a generation prompt, the reference problem for a problem
/// prompt, and candidate 1 for a rerank prompt. Lets the whole pipeline run
/// without a network.
pub struct CorpusOracle {
    actions: Vec<(String, String)>,
    problems: Vec<(String, String)>,
}

impl CorpusOracle {
    pub fn new(corpus: &Corpus) -> Self {
        let mut actions = Vec::new();
        let mut problems = Vec::new();
        for e in &corpus.entries {
            let registry = FluentRegistry::from_domain(&e.domain);
            for (name, desc) in &e.action_descriptions {
                let action = e.domain.action(name).expect("descriptions match actions");
                actions
                    .push((desc.trim().to_string(), format!("```pddl\n{}\n```", action_fragment(action, &registry))));
            }
            for p in &e.problems {
                problems
                    .push((p.description.trim().to_string(), format!("```pddl\n{}```", render_problem(&p.problem))));
            }
        }
        CorpusOracle { actions, problems }
    }

    fn lookup<'a>(table: &'a [(String, String)], text: &str) -> Option<&'a str> {
        table.iter().find(|(d, _)| text.contains(d.as_str())).map(|(_, a)| a.as_str())
    }
}

impl LlmBackend for CorpusOracle {
    fn complete(&self, messages: &[Message], _params: &CompletionParams) -> Result<String, LlmError> {
        let prompt = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .ok_or_else(|| LlmError::Other("no user message".into()))?;
        if prompt.starts_with("Target action description:") {
            return Ok("1".into());
        }
        let (table, marker) = if prompt.contains(PROBLEM_HEADER) {
            (&self.problems, PROBLEM_HEADER)
        } else {
            (&self.actions, TARGET_HEADER)
        };
        let target = prompt.rsplit_once(marker).map(|(_, t)| t).unwrap_or(prompt);
        CorpusOracle::lookup(table, target)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Other("prompt matches no corpus description".into()))
    }
}
