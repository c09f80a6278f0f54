//! Python bindings: syntax checking, complexity scoring, plan validation and
//! search over PDDL text.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spar_core::checker::{check_domain_text, Extern};
use spar_core::complexity::{complexity_report, default_threshold, Weights, COMPONENT_NAMES};
use spar_core::diagnostics::Diagnostic as CoreDiagnostic;
use spar_core::pddl::rational::{display, parse_decimal};
use spar_core::pddl::{parse_domain, parse_plan, parse_problem, render_domain, render_plan, Domain, Problem};
use spar_core::planner::{solve as core_solve, SearchLimits, SolveOutcome};
use spar_core::validator::{validate_plan, Outcome};

fn errors(diags: &[CoreDiagnostic]) -> PyErr {
    let text = diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
    PyValueError::new_err(text)
}

fn domain(text: &str) -> PyResult<Domain> {
    parse_domain(text).map_err(|d| errors(&d))
}

fn problem(text: &str, dom: &Domain) -> PyResult<Problem> {
    parse_problem(text, dom).map_err(|d| errors(&d))
}

/// One syntax or semantic error found by `check`.
#[pyclass(frozen, get_all)]
struct Diagnostic {
    category: String,
    line: usize,
    column: usize,
    message: String,
    suggestion: String,
}

#[pymethods]
impl Diagnostic {
    fn __repr__(&self) -> String {
        format!("Diagnostic({}:{} [{}] {})", self.line, self.column, self.category, self.message)
    }
}

impl From<&CoreDiagnostic> for Diagnostic {
    fn from(d: &CoreDiagnostic) -> Self {
        Diagnostic {
            category: d.category.to_string(),
            line: d.location.line,
            column: d.location.column,
            message: d.message.clone(),
            suggestion: d.suggestion.clone(),
        }
    }
}

/// Checks a domain. With `declarations`, object types and requirements are
/// restricted to those of that domain text. Returns an empty list when clean.
#[pyfunction]
#[pyo3(signature = (text, declarations=None))]
fn check(text: &str, declarations: Option<&str>) -> PyResult<Vec<Diagnostic>> {
    let ext = declarations.map(domain).transpose()?.map(|d| Extern::from_domain(&d));
    Ok(match check_domain_text(text, ext.as_ref()) {
        Ok(_) => Vec::new(),
        Err(diags) => diags.iter().map(Diagnostic::from).collect(),
    })
}

/// Canonical rendering of a domain.
#[pyfunction]
fn normalize(text: &str) -> PyResult<String> {
    Ok(render_domain(&domain(text)?))
}

/// Complexity components, score and class under unit weights. Exact values
/// are returned as strings such as `"34/3"` or `"1.5"`.
#[pyfunction]
#[pyo3(signature = (text, threshold=None))]
fn complexity(text: &str, threshold: Option<&str>) -> PyResult<BTreeMap<String, String>> {
    let t = match threshold {
        Some(t) => parse_decimal(t).ok_or_else(|| PyValueError::new_err(format!("`{t}` is not a decimal number")))?,
        None => default_threshold(),
    };
    let report = complexity_report(&domain(text)?, &Weights::unit(), &t);
    let mut out: BTreeMap<String, String> =
        COMPONENT_NAMES.iter().zip(report.components.values()).map(|(k, v)| (k.to_string(), display(&v))).collect();
    out.insert("score".into(), display(&report.score));
    out.insert("class".into(), report.class.to_string());
    Ok(out)
}

/// Simulates a plan. Returns `None` when it is valid, else
/// `(step, reason)` with a 0-based step, where `step == len(plan)` means
/// the goal does not hold at the end.
#[pyfunction]
fn validate(domain_text: &str, problem_text: &str, plan_text: &str) -> PyResult<Option<(usize, String)>> {
    let dom = domain(domain_text)?;
    let prob = problem(problem_text, &dom)?;
    let plan = parse_plan(plan_text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(match validate_plan(&dom, &prob, &plan).outcome {
        Outcome::Valid => None,
        Outcome::FailedAt { step, reason } => Some((step, reason.to_string())),
    })
}

/// Finds a shortest plan with the built-in search. Returns the plan text,
/// or `None` when the problem is unsolvable. Raises when a search limit is
/// hit.
#[pyfunction]
#[pyo3(signature = (domain_text, problem_text, max_expanded_states=None))]
fn solve(
    py: Python<'_>,
    domain_text: &str,
    problem_text: &str,
    max_expanded_states: Option<usize>,
) -> PyResult<Option<String>> {
    let dom = domain(domain_text)?;
    let prob = problem(problem_text, &dom)?;
    let mut lim = SearchLimits::default();
    if let Some(n) = max_expanded_states {
        lim.max_expanded_states = n;
    }
    match py.detach(|| core_solve(&dom, &prob, &lim)).outcome {
        SolveOutcome::Solved { plan } => Ok(Some(render_plan(&plan))),
        SolveOutcome::ProvedUnsolvable => Ok(None),
        SolveOutcome::LimitExceeded { reason } => Err(PyValueError::new_err(format!("search limit: {reason}"))),
    }
}

#[pymodule]
fn spar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Diagnostic>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
