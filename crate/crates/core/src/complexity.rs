//! Structural complexity score of a domain and the simple/complex split.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::rational::{display, int, parse_decimal, ratio, Rational};
use crate::pddl::{Domain, Effect};

/// Default simple/complex threshold (inclusive on the simple side).
pub fn default_threshold() -> Rational {
    ratio(523, 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentVector {
    pub n_actions: usize,
    pub n_types: usize,
    pub n_predicates: usize,
    pub n_functions: usize,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub avg_preconditions: Rational,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub avg_effects: Rational,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub interdependency_pred: Rational,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub interdependency_func: Rational,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub action_coupling: Rational,
}

pub const COMPONENT_NAMES: [&str; 9] = [
    "n_actions",
    "n_types",
    "n_predicates",
    "n_functions",
    "avg_preconditions",
    "avg_effects",
    "interdependency_pred",
    "interdependency_func",
    "action_coupling",
];

impl ComponentVector {
    pub fn values(&self) -> [Rational; 9] {
        [
            int(self.n_actions as i64),
            int(self.n_types as i64),
            int(self.n_predicates as i64),
            int(self.n_functions as i64),
            self.avg_preconditions.clone(),
            self.avg_effects.clone(),
            self.interdependency_pred.clone(),
            self.interdependency_func.clone(),
            self.action_coupling.clone(),
        ]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightsError {
    #[error("line {line}: unknown component `{key}`")]
    UnknownComponent { line: usize, key: String },
    #[error("line {line}: expected `component = number`")]
    Malformed { line: usize },
    #[error("weights must be nonnegative (`{0}`)")]
    Negative(String),
    #[error("at least one weight must be positive")]
    AllZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights(pub [Rational; 9]);

impl Default for Weights {
    fn default() -> Self {
        Weights::unit()
    }
}

impl Weights {
    pub fn unit() -> Self {
        Weights(std::array::from_fn(|_| int(1)))
    }

    pub fn new(values: [Rational; 9]) -> Result<Self, WeightsError> {
        for (name, v) in COMPONENT_NAMES.iter().zip(&values) {
            if *v < Rational::zero() {
                return Err(WeightsError::Negative((*name).to_string()));
            }
        }
        if values.iter().all(Zero::is_zero) {
            return Err(WeightsError::AllZero);
        }
        Ok(Weights(values))
    }

    /// Reads `component = value` lines; unspecified components keep weight 1.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, WeightsError> {
        let mut values = Weights::unit().0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(WeightsError::Malformed { line: i + 1 })?;
            let key = key.trim();
            let idx = COMPONENT_NAMES
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| WeightsError::UnknownComponent { line: i + 1, key: key.to_string() })?;
            values[idx] = parse_decimal(value.trim()).ok_or(WeightsError::Malformed { line: i + 1 })?;
        }
        Weights::new(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityClass {
    Simple,
    Complex,
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplexityClass::Simple => "simple",
            ComplexityClass::Complex => "complex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub components: ComponentVector,
    /// Total coupled effect conditions before averaging over actions.
    pub coupling_sum: usize,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub score: Rational,
    #[serde(with = "crate::pddl::rational::as_string")]
    pub threshold: Rational,
    pub class: ComplexityClass,
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in COMPONENT_NAMES.iter().zip(self.components.values()) {
            writeln!(f, "{name:<22}{}", display(&v))?;
        }
        writeln!(f, "{:<22}{}", "coupling_sum", self.coupling_sum)?;
        writeln!(f, "{:<22}{}", "score", display(&self.score))?;
        write!(f, "{:<22}{} (threshold {})", "class", self.class, display(&self.threshold))
    }
}

fn mean(total: usize, count: usize) -> Rational {
    if count == 0 {
        Rational::zero()
    } else {
        ratio(total as i64, count as i64)
    }
}

fn coupling_counts(dom: &Domain) -> Vec<usize> {
    let pre_names: Vec<BTreeSet<&str>> = dom.actions.iter().map(|a| a.precondition.fluent_names()).collect();
    dom.actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a.effect
                .literals()
                .into_iter()
                .filter_map(Effect::target_name)
                .filter(|name| pre_names.iter().enumerate().any(|(j, p)| j != i && p.contains(name)))
                .count()
        })
        .collect()
}

pub fn complexity_components(dom: &Domain) -> ComponentVector {
    let n = dom.actions.len();
    let pre_total: usize = dom.actions.iter().map(|a| a.precondition.conjuncts().len()).sum();
    let eff_total: usize = dom.actions.iter().map(|a| a.effect.literals().len()).sum();
    let referenced: Vec<BTreeSet<&str>> = dom.actions.iter().map(|a| a.fluent_names()).collect();
    let refs = |name: &str| referenced.iter().filter(|r| r.contains(name)).count();
    let pred_refs: usize = dom.predicates.iter().map(|p| refs(&p.name)).sum();
    let func_refs: usize = dom.functions.iter().map(|f| refs(&f.name)).sum();
    let coupling: usize = coupling_counts(dom).iter().sum();
    ComponentVector {
        n_actions: n,
        n_types: dom.types.len(),
        n_predicates: dom.predicates.len(),
        n_functions: dom.functions.len(),
        avg_preconditions: mean(pre_total, n),
        avg_effects: mean(eff_total, n),
        interdependency_pred: mean(pred_refs, dom.predicates.len()),
        interdependency_func: mean(func_refs, dom.functions.len()),
        action_coupling: mean(coupling, n),
    }
}

pub fn complexity_score(cv: &ComponentVector, w: &Weights) -> Rational {
    cv.values().iter().zip(&w.0).map(|(c, w)| c * w).sum()
}

pub fn classify(score: &Rational, threshold: &Rational) -> ComplexityClass {
    if score <= threshold {
        ComplexityClass::Simple
    } else {
        ComplexityClass::Complex
    }
}

pub fn complexity_report(dom: &Domain, w: &Weights, threshold: &Rational) -> ComplexityReport {
    let components = complexity_components(dom);
    let score = complexity_score(&components, w);
    ComplexityReport {
        coupling_sum: coupling_counts(dom).iter().sum(),
        class: classify(&score, threshold),
        threshold: threshold.clone(),
        score,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    #[test]
    fn empty_domain_is_all_zero() {
        let cv = complexity_components(&Domain::new("d"));
        assert_eq!(cv, ComponentVector::default());
        assert_eq!(complexity_score(&cv, &Weights::unit()), int(0));
    }

    #[test]
    fn unit_vector_scores_nine() {
        let cv = ComponentVector {
            n_actions: 1,
            n_types: 1,
            n_predicates: 1,
            n_functions: 1,
            avg_preconditions: int(1),
            avg_effects: int(1),
            interdependency_pred: int(1),
            interdependency_func: int(1),
            action_coupling: int(1),
        };
        assert_eq!(complexity_score(&cv, &Weights::unit()), int(9));
    }

    #[test]
    fn classify_boundary() {
        let t = default_threshold();
        assert_eq!(classify(&parse_decimal("5.23").unwrap(), &t), ComplexityClass::Simple);
        assert_eq!(classify(&parse_decimal("5.24").unwrap(), &t), ComplexityClass::Complex);
        assert_eq!(classify(&parse_decimal("2.79").unwrap(), &t), ComplexityClass::Simple);
    }

    #[test]
    fn shared_predicate_counts_every_action() {
        let dom = parse_domain(
            "(define (domain d) (:predicates (ready) (x) (y))
              (:action a :parameters () :precondition (ready) :effect (x))
              (:action b :parameters () :precondition (and (ready) (x)) :effect (y))
              (:action c :parameters () :precondition (and (ready) (y)) :effect (not (x))))",
        )
        .unwrap();
        let cv = complexity_components(&dom);
        // ready: 3 actions, x: 3, y: 2
        assert_eq!(cv.interdependency_pred, ratio(8, 3));
        // a's (x) feeds b; b's (y) feeds c; c's (not (x)) feeds b
        assert_eq!(cv.action_coupling, int(1));
        assert_eq!(cv.avg_preconditions, ratio(5, 3));
    }

    #[test]
    fn weights_file() {
        let w = Weights::parse("# comment\nn_types = 0.5\navg_effects=2\n").unwrap();
        assert_eq!(w.0[1], ratio(1, 2));
        assert_eq!(w.0[5], int(2));
        assert!(matches!(Weights::parse("bogus = 1"), Err(WeightsError::UnknownComponent { .. })));
        assert_eq!(Weights::parse(&COMPONENT_NAMES.map(|n| format!("{n}=0\n")).concat()), Err(WeightsError::AllZero));
    }
}
