//! Semantic evaluation of a generated domain against its ground truth:
//! executability (generated problems solved in the generated domain),
//! feasibility (those plans replayed on the ground truth) and
//! interpretability (ground-truth plans replayed in the generated domain),
//! plus syntax error tallies over generation traces.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::complexity::ComplexityClass;
use crate::corpus::Tier;
use crate::diagnostics::Category;
use crate::generation::GenerationTrace;
use crate::pddl::{Domain, Plan, Problem};
use crate::planner::Engine;
use crate::validator::{validate_plan, ValidationReport};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no problems to evaluate")]
    EmptyDenominator,
    #[error("{generated} generated problems but {reference} reference items")]
    LengthMismatch { generated: usize, reference: usize },
}

/// A success count with its denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub total: usize,
}

impl Rate {
    pub fn new(successes: usize, total: usize) -> Self {
        assert!(successes <= total, "rate numerator exceeds denominator");
        Rate { successes, total }
    }

    /// None for an empty denominator.
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.successes as f64 / self.total as f64)
    }

    fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let mut r = Rate::default();
        for f in flags {
            r.total += 1;
            r.successes += usize::from(f);
        }
        r
    }
}

impl std::ops::Add for Rate {
    type Output = Rate;

    fn add(self, o: Rate) -> Rate {
        Rate { successes: self.successes + o.successes, total: self.total + o.total }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{:>6.2}% ({}/{})", v * 100.0, self.successes, self.total),
            None => write!(f, "     - (0/0)"),
        }
    }
}

fn solved_plan(engine: &Engine, dom: &Domain, prob: &Problem) -> Result<Option<Plan>, String> {
    match engine.solve(dom, prob) {
        Ok(res) => Ok(res.plan().cloned()),
        Err(e) => Err(e.to_string()),
    }
}

/// Fraction of problems the engine solves in `gen_dom`.
pub fn executability(gen_dom: &Domain, gen_problems: &[Problem], engine: &Engine) -> Result<Rate, EvalError> {
    if gen_problems.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    Ok(Rate::from_flags(gen_problems.iter().map(|p| match solved_plan(engine, gen_dom, p) {
        Ok(plan) => plan.is_some(),
        Err(e) => {
            warn!(problem = %p.name, error = %e, "engine error counted as unsolved");
            false
        }
    })))
}

/// Fraction of problems whose plan in `gen_dom` is valid on the ground
/// truth. Unsolved problems count as infeasible.
pub fn feasibility(
    gen_dom: &Domain,
    gen_problems: &[Problem],
    gt_dom: &Domain,
    gt_problems: &[Problem],
    engine: &Engine,
) -> Result<Rate, EvalError> {
    if gen_problems.len() != gt_problems.len() {
        return Err(EvalError::LengthMismatch { generated: gen_problems.len(), reference: gt_problems.len() });
    }
    if gen_problems.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    Ok(Rate::from_flags(gen_problems.iter().zip(gt_problems).map(|(gp, tp)| match solved_plan(engine, gen_dom, gp) {
        Ok(Some(plan)) => validate_plan(gt_dom, tp, &plan).is_valid(),
        _ => false,
    })))
}

/// Fraction of reference plans valid in `gen_dom`. The plans must already be
/// verified against the ground truth.
pub fn interpretability(gt_plans: &[Plan], gen_dom: &Domain, gen_problems: &[Problem]) -> Result<Rate, EvalError> {
    if gen_problems.len() != gt_plans.len() {
        return Err(EvalError::LengthMismatch { generated: gen_problems.len(), reference: gt_plans.len() });
    }
    if gt_plans.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    Ok(Rate::from_flags(gt_plans.iter().zip(gen_problems).map(|(plan, p)| validate_plan(gen_dom, p, plan).is_valid())))
}

/// One aligned problem: the generated version (absent when generation
/// failed), the reference version and its reference plan if any.
#[derive(Debug, Clone, Copy)]
pub struct EvalCase<'a> {
    pub tier: Tier,
    pub index: usize,
    pub gen_problem: Option<&'a Problem>,
    pub gt_problem: &'a Problem,
    pub gt_plan: Option<&'a Plan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ReferencePlan {
    /// From the corpus, valid on the ground truth.
    Given,
    /// No plan in the corpus; the engine solved the ground truth instead.
    Solved,
    /// Excluded from interpretability.
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub tier: Tier,
    pub index: usize,
    /// False when no generated problem exists for this slot.
    pub generated: bool,
    pub solved: bool,
    pub feasible: bool,
    /// None when the reference plan is unavailable.
    pub interpretable: Option<bool>,
    pub reference_plan: ReferencePlan,
    pub gen_plan: Option<Plan>,
    /// Where the generated plan failed on the ground truth, if it did.
    pub feasibility_failure: Option<String>,
    /// Where the reference plan failed in the generated domain, if it did.
    pub interpretability_failure: Option<String>,
}

fn failure_text(report: &ValidationReport) -> Option<String> {
    (!report.is_valid()).then(|| report.outcome.to_string())
}

/// Evaluates every case. `gen_dom` is None when domain generation failed,
/// which makes every case unsolved.
pub fn evaluate_cases(
    gen_dom: Option<&Domain>,
    gt_dom: &Domain,
    cases: &[EvalCase],
    engine: &Engine,
) -> Result<Vec<ProblemOutcome>, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let reference = match case.gt_plan {
            Some(p) if validate_plan(gt_dom, case.gt_problem, p).is_valid() => Ok((p.clone(), ReferencePlan::Given)),
            Some(_) => Err("reference plan is invalid on the ground truth".to_string()),
            None => match solved_plan(engine, gt_dom, case.gt_problem) {
                Ok(Some(p)) => Ok((p, ReferencePlan::Solved)),
                Ok(None) => Err("engine did not solve the ground-truth problem".to_string()),
                Err(e) => Err(e),
            },
        };
        let (gt_plan, reference_plan) = match reference {
            Ok((p, r)) => (Some(p), r),
            Err(reason) => {
                warn!(tier = %case.tier, index = case.index, %reason, "reference plan excluded");
                (None, ReferencePlan::Unavailable { reason })
            }
        };
        let mut o = ProblemOutcome {
            tier: case.tier,
            index: case.index,
            generated: case.gen_problem.is_some(),
            solved: false,
            feasible: false,
            interpretable: gt_plan.as_ref().map(|_| false),
            reference_plan,
            gen_plan: None,
            feasibility_failure: None,
            interpretability_failure: None,
        };
        if let (Some(dom), Some(prob)) = (gen_dom, case.gen_problem) {
            match solved_plan(engine, dom, prob) {
                Ok(Some(plan)) => {
                    let on_gt = validate_plan(gt_dom, case.gt_problem, &plan);
                    o.solved = true;
                    o.feasible = on_gt.is_valid();
                    o.feasibility_failure = failure_text(&on_gt);
                    o.gen_plan = Some(plan);
                }
                Ok(None) => {}
                Err(e) => warn!(tier = %case.tier, index = case.index, error = %e, "engine error counted as unsolved"),
            }
            if let Some(plan) = &gt_plan {
                let in_gen = validate_plan(dom, prob, plan);
                o.interpretable = Some(in_gen.is_valid());
                o.interpretability_failure = failure_text(&in_gen);
            }
        }
        out.push(o);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rates {
    pub executability: Rate,
    pub feasibility: Rate,
    /// Feasible plans among solved problems only.
    pub feasibility_among_solved: Rate,
    pub interpretability: Rate,
    /// Slots with no generated problem, counted as unsolved above.
    pub generation_failures: usize,
}

impl Rates {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a ProblemOutcome>) -> Rates {
        let mut r = Rates::default();
        for o in outcomes {
            r.executability = r.executability + Rate::from_flags([o.solved]);
            r.feasibility = r.feasibility + Rate::from_flags([o.feasible]);
            if o.solved {
                r.feasibility_among_solved = r.feasibility_among_solved + Rate::from_flags([o.feasible]);
            }
            if let Some(i) = o.interpretable {
                r.interpretability = r.interpretability + Rate::from_flags([i]);
            }
            r.generation_failures += usize::from(!o.generated);
        }
        r
    }
}

impl std::ops::Add for Rates {
    type Output = Rates;

    fn add(self, o: Rates) -> Rates {
        Rates {
            executability: self.executability + o.executability,
            feasibility: self.feasibility + o.feasibility,
            feasibility_among_solved: self.feasibility_among_solved + o.feasibility_among_solved,
            interpretability: self.interpretability + o.interpretability,
            generation_failures: self.generation_failures + o.generation_failures,
        }
    }
}

/// Syntax errors of one domain's generation session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub by_category: BTreeMap<Category, usize>,
    /// Diagnostics raised at attempt 1, 2, ...
    pub by_attempt: Vec<usize>,
    /// Attempts that needed a correction.
    pub corrections: usize,
}

impl ErrorCounts {
    pub fn from_trace(trace: &GenerationTrace) -> ErrorCounts {
        let mut c = ErrorCounts::default();
        for action in &trace.actions {
            for (i, it) in action.iterations.iter().enumerate() {
                if c.by_attempt.len() <= i {
                    c.by_attempt.resize(i + 1, 0);
                }
                c.by_attempt[i] += it.diagnostics.len();
                c.corrections += usize::from(!it.diagnostics.is_empty());
                for d in &it.diagnostics {
                    *c.by_category.entry(d.category).or_insert(0) += 1;
                }
            }
        }
        c
    }

    pub fn count(&self, cat: Category) -> usize {
        self.by_category.get(&cat).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.by_category.values().sum()
    }
}

/// Error counts per category split by complexity class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub simple: BTreeMap<Category, usize>,
    pub complex: BTreeMap<Category, usize>,
    pub corrections_simple: usize,
    pub corrections_complex: usize,
}

impl ErrorTable {
    pub fn get(&self, class: ComplexityClass, cat: Category) -> usize {
        let m = match class {
            ComplexityClass::Simple => &self.simple,
            ComplexityClass::Complex => &self.complex,
        };
        m.get(&cat).copied().unwrap_or(0)
    }

    pub fn total(&self, cat: Category) -> usize {
        self.get(ComplexityClass::Simple, cat) + self.get(ComplexityClass::Complex, cat)
    }

    pub fn corrections(&self) -> usize {
        self.corrections_simple + self.corrections_complex
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out, "{:<18}{:>6}{:>6}{:>6}", "error type", "S.", "C.", "T.");
        for cat in Category::ALL {
            let (s, c) = (self.get(ComplexityClass::Simple, cat), self.get(ComplexityClass::Complex, cat));
            let _ = writeln!(out, "{:<18}{s:>6}{c:>6}{:>6}", cat.label(), s + c);
        }
        let _ = writeln!(
            out,
            "{:<18}{:>6}{:>6}{:>6}",
            "corrections",
            self.corrections_simple,
            self.corrections_complex,
            self.corrections()
        );
    }
}

/// Sums diagnostics per category over traces, split by domain class.
pub fn tally_errors<'a>(traces: impl IntoIterator<Item = (ComplexityClass, &'a GenerationTrace)>) -> ErrorTable {
    let mut t = ErrorTable::default();
    for (class, trace) in traces {
        let c = ErrorCounts::from_trace(trace);
        let (map, corr) = match class {
            ComplexityClass::Simple => (&mut t.simple, &mut t.corrections_simple),
            ComplexityClass::Complex => (&mut t.complex, &mut t.corrections_complex),
        };
        for (cat, n) in c.by_category {
            *map.entry(cat).or_insert(0) += n;
        }
        *corr += c.corrections;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub domain_id: String,
    pub class: ComplexityClass,
    pub score: f64,
    /// Domain generation finished without needs-human actions.
    pub complete: bool,
    pub tiers: BTreeMap<Tier, Rates>,
    pub total: Rates,
    pub errors: ErrorCounts,
    pub problems: Vec<ProblemOutcome>,
}

impl DomainReport {
    pub fn new(
        domain_id: &str,
        class: ComplexityClass,
        score: f64,
        complete: bool,
        errors: ErrorCounts,
        problems: Vec<ProblemOutcome>,
    ) -> Self {
        let tiers =
            Tier::ALL.into_iter().map(|t| (t, Rates::from_outcomes(problems.iter().filter(|o| o.tier == t)))).collect();
        DomainReport {
            domain_id: domain_id.to_string(),
            class,
            score,
            complete,
            tiers,
            total: Rates::from_outcomes(&problems),
            errors,
            problems,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub preset: Option<String>,
    pub domains: Vec<DomainReport>,
    pub simple: Rates,
    pub complex: Rates,
    pub total: Rates,
    pub errors: ErrorTable,
}

impl EvaluationReport {
    pub fn new(preset: Option<String>, domains: Vec<DomainReport>, errors: ErrorTable) -> Self {
        let sum = |class: Option<ComplexityClass>| {
            domains.iter().filter(|d| class.is_none_or(|c| d.class == c)).fold(Rates::default(), |acc, d| acc + d.total)
        };
        EvaluationReport {
            preset,
            simple: sum(Some(ComplexityClass::Simple)),
            complex: sum(Some(ComplexityClass::Complex)),
            total: sum(None),
            errors,
            domains,
        }
    }

    /// Human-readable tables: per-domain rates by tier, class aggregates and
    /// the error table.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.preset {
            let _ = writeln!(s, "preset: {p}\n");
        }
        let _ = writeln!(
            s,
            "{:<16}{:<8}{:<8}{:>22}{:>22}{:>22}",
            "domain", "class", "tier", "executability", "feasibility", "interpretability"
        );
        let row = |s: &mut String, d: &str, c: &str, t: &str, r: &Rates| {
            let _ = writeln!(
                s,
                "{d:<16}{c:<8}{t:<8}{:>22}{:>22}{:>22}",
                r.executability.to_string(),
                r.feasibility.to_string(),
                r.interpretability.to_string()
            );
        };
        for d in &self.domains {
            for (tier, r) in &d.tiers {
                row(&mut s, &d.domain_id, &d.class.to_string(), tier.as_str(), r);
            }
            row(&mut s, &d.domain_id, &d.class.to_string(), "all", &d.total);
        }
        let _ = writeln!(s);
        row(&mut s, "S.", "", "all", &self.simple);
        row(&mut s, "C.", "", "all", &self.complex);
        row(&mut s, "Total", "", "all", &self.total);
        let _ = writeln!(s);
        self.errors.render(&mut s);
        s
    }
}
