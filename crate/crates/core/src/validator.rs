//! Plan execution against a domain and problem: grounding, precondition
//! checks, effect application with exact numeric semantics, goal test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::rational::display;
use crate::pddl::{
    Action, ArithOp, Condition, Domain, Effect, FluentRef, Ground, NumExpr, NumericOp, Plan, Problem, Rational, Term,
};

/// Variable (with `?`) to object.
pub type Binding = BTreeMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct State {
    pub atoms: BTreeSet<Ground>,
    pub fluents: BTreeMap<Ground, Rational>,
}

impl State {
    pub fn holds(&self, atom: &Ground) -> bool {
        self.atoms.contains(atom)
    }

    pub fn value(&self, fluent: &Ground) -> Option<&Rational> {
        self.fluents.get(fluent)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.atoms.iter().map(Ground::to_string).collect();
        parts.extend(self.fluents.iter().map(|(g, v)| format!("{g}={}", display(v))));
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ExecError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("fluent {0} has no value")]
    UnassignedFluent(String),
    #[error("variable {0} is not bound")]
    UnboundVariable(String),
}

pub fn initial_state(prob: &Problem) -> State {
    State { atoms: prob.init_atoms.clone(), fluents: prob.init_fluents.clone() }
}

fn ground_term(t: &Term, b: &Binding) -> Result<String, ExecError> {
    match t {
        Term::Object(o) => Ok(o.clone()),
        Term::Var(v) => b.get(v).cloned().ok_or_else(|| ExecError::UnboundVariable(v.clone())),
    }
}

fn ground(name: &str, args: &[Term], b: &Binding) -> Result<Ground, ExecError> {
    let args = args.iter().map(|t| ground_term(t, b)).collect::<Result<_, _>>()?;
    Ok(Ground { name: name.to_string(), args })
}

fn ground_fluent(r: &FluentRef, b: &Binding) -> Result<Ground, ExecError> {
    ground(&r.function, &r.args, b)
}

pub fn evaluate_numeric(e: &NumExpr, s: &State, b: &Binding) -> Result<Rational, ExecError> {
    match e {
        NumExpr::Constant(v) => Ok(v.clone()),
        NumExpr::Fluent(r) => {
            let g = ground_fluent(r, b)?;
            s.value(&g).cloned().ok_or_else(|| ExecError::UnassignedFluent(g.to_string()))
        }
        NumExpr::Binary(op, lhs, rhs) => {
            let l = evaluate_numeric(lhs, s, b)?;
            let r = evaluate_numeric(rhs, s, b)?;
            Ok(match op {
                ArithOp::Add => l + r,
                ArithOp::Sub => l - r,
                ArithOp::Mul => l * r,
                ArithOp::Div => {
                    if r.is_zero() {
                        return Err(ExecError::DivisionByZero);
                    }
                    l / r
                }
            })
        }
    }
}

pub fn evaluate_condition(c: &Condition, s: &State, b: &Binding) -> Result<bool, ExecError> {
    Ok(match c {
        Condition::Atom(a) => s.holds(&ground(&a.predicate, &a.args, b)?),
        Condition::Not(inner) => !evaluate_condition(inner, s, b)?,
        Condition::And(cs) => {
            for c in cs {
                if !evaluate_condition(c, s, b)? {
                    return Ok(false);
                }
            }
            true
        }
        Condition::Compare(op, l, r) => op.holds(&evaluate_numeric(l, s, b)?, &evaluate_numeric(r, s, b)?),
        Condition::Equals(x, y) => ground_term(x, b)? == ground_term(y, b)?,
    })
}

/// Binds action parameters positionally. Arity is the caller's concern.
pub fn bind(act: &Action, args: &[String]) -> Binding {
    act.params.iter().zip(args).map(|(p, a)| (p.name.clone(), a.clone())).collect()
}

pub fn applicable(s: &State, act: &Action, args: &[String]) -> Result<bool, ExecError> {
    evaluate_condition(&act.precondition, s, &bind(act, args))
}

/// Applies the effect: deletes, then adds, then numeric updates computed from
/// the pre-action state. The input state is left untouched.
pub fn apply(s: &State, act: &Action, args: &[String]) -> Result<State, ExecError> {
    apply_bound(s, &act.effect, &bind(act, args))
}

pub(crate) fn apply_bound(s: &State, effect: &Effect, b: &Binding) -> Result<State, ExecError> {
    let mut deletes = Vec::new();
    let mut adds = Vec::new();
    let mut updates = Vec::new();
    for lit in effect.literals() {
        match lit {
            Effect::Delete(a) => deletes.push(ground(&a.predicate, &a.args, b)?),
            Effect::Add(a) => adds.push(ground(&a.predicate, &a.args, b)?),
            Effect::Numeric(op, target, value) => {
                let g = ground_fluent(target, b)?;
                let v = evaluate_numeric(value, s, b)?;
                let new = match op {
                    NumericOp::Assign => v,
                    NumericOp::Increase | NumericOp::Decrease => {
                        let old = s.value(&g).ok_or_else(|| ExecError::UnassignedFluent(g.to_string()))?;
                        if *op == NumericOp::Increase {
                            old + v
                        } else {
                            old - v
                        }
                    }
                };
                updates.push((g, new));
            }
            Effect::And(_) => {}
        }
    }
    let mut next = s.clone();
    for g in &deletes {
        next.atoms.remove(g);
    }
    next.atoms.extend(adds);
    for (g, v) in updates {
        next.fluents.insert(g, v);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FailureReason {
    UnknownAction { action: String },
    BadArguments { detail: String },
    PreconditionNotSatisfied { unsatisfied: Vec<String> },
    Execution { error: ExecError },
    GoalNotSatisfied,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::UnknownAction { action } => write!(f, "unknown action `{action}`"),
            FailureReason::BadArguments { detail } => write!(f, "bad arguments: {detail}"),
            FailureReason::PreconditionNotSatisfied { unsatisfied } => {
                write!(f, "precondition not satisfied: {}", unsatisfied.join(", "))
            }
            FailureReason::Execution { error } => write!(f, "execution error: {error}"),
            FailureReason::GoalNotSatisfied => write!(f, "goal not satisfied"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Valid,
    FailedAt { step: usize, reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub action: String,
    pub applicable: bool,
    /// Atoms and fluents changed by the step, e.g. `-(at u a) +(at u b)`.
    pub changes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
    pub goal_satisfied: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.outcome == Outcome::Valid
    }

    pub fn failed_step(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Valid => None,
            Outcome::FailedAt { step, .. } => Some(step),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.trace {
            let mark = if t.applicable { "ok" } else { "FAILED" };
            writeln!(f, "{:>3}: {} [{mark}] {}", t.step, t.action, t.changes)?;
        }
        write!(f, "{}", self.outcome)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Valid => write!(f, "Plan valid"),
            Outcome::FailedAt { step, reason } => write!(f, "Plan failed at step {step}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Skip the final goal test.
    pub steps_only: bool,
}

fn diff(before: &State, after: &State) -> String {
    let mut parts: Vec<String> = before.atoms.difference(&after.atoms).map(|g| format!("-{g}")).collect();
    parts.extend(after.atoms.difference(&before.atoms).map(|g| format!("+{g}")));
    for (g, v) in &after.fluents {
        if before.fluents.get(g) != Some(v) {
            parts.push(format!("{g}:={}", display(v)));
        }
    }
    parts.join(" ")
}

fn check_arguments(dom: &Domain, prob: &Problem, act: &Action, args: &[String]) -> Result<(), String> {
    if act.params.len() != args.len() {
        return Err(format!("`{}` takes {} argument(s), got {}", act.name, act.params.len(), args.len()));
    }
    let h = dom.type_hierarchy();
    for (p, a) in act.params.iter().zip(args) {
        let Some(ty) = prob.object_type(a) else {
            return Err(format!("object `{a}` is not declared"));
        };
        if !h.is_subtype(ty, &p.ty) {
            return Err(format!("object `{a}` has type `{ty}`, `{}` expected for {}", p.ty, p.name));
        }
    }
    Ok(())
}

fn unsatisfied(c: &Condition, s: &State, b: &Binding) -> Vec<String> {
    c.conjuncts()
        .into_iter()
        .filter(|c| !matches!(evaluate_condition(c, s, b), Ok(true)))
        .map(|c| {
            let mut text = crate::pddl::render::render_condition(c);
            for (var, obj) in b {
                text = text
                    .replace(&format!("{var} "), &format!("{obj} "))
                    .replace(&format!("{var})"), &format!("{obj})"));
            }
            text
        })
        .collect()
}

pub fn validate_plan(dom: &Domain, prob: &Problem, plan: &Plan) -> ValidationReport {
    validate_plan_with(dom, prob, plan, ValidateOptions::default())
}

pub fn validate_plan_with(dom: &Domain, prob: &Problem, plan: &Plan, opts: ValidateOptions) -> ValidationReport {
    let mut state = initial_state(prob);
    let mut trace = Vec::with_capacity(plan.len());
    let fail = |trace, step, reason| ValidationReport {
        outcome: Outcome::FailedAt { step, reason },
        trace,
        goal_satisfied: false,
    };
    for (i, step) in plan.steps.iter().enumerate() {
        let mut entry = TraceEntry { step: i, action: step.to_string(), applicable: false, changes: String::new() };
        let Some(act) = dom.action(&step.action) else {
            trace.push(entry);
            return fail(trace, i, FailureReason::UnknownAction { action: step.action.clone() });
        };
        if let Err(detail) = check_arguments(dom, prob, act, &step.args) {
            trace.push(entry);
            return fail(trace, i, FailureReason::BadArguments { detail });
        }
        let b = bind(act, &step.args);
        match evaluate_condition(&act.precondition, &state, &b) {
            Ok(true) => {}
            Ok(false) => {
                let missing = unsatisfied(&act.precondition, &state, &b);
                trace.push(entry);
                return fail(trace, i, FailureReason::PreconditionNotSatisfied { unsatisfied: missing });
            }
            Err(error) => {
                trace.push(entry);
                return fail(trace, i, FailureReason::Execution { error });
            }
        }
        match apply_bound(&state, &act.effect, &b) {
            Ok(next) => {
                entry.applicable = true;
                entry.changes = diff(&state, &next);
                trace.push(entry);
                state = next;
            }
            Err(error) => {
                trace.push(entry);
                return fail(trace, i, FailureReason::Execution { error });
            }
        }
    }
    let goal_satisfied = matches!(evaluate_condition(&prob.goal, &state, &Binding::new()), Ok(true));
    if goal_satisfied || opts.steps_only {
        ValidationReport { outcome: Outcome::Valid, trace, goal_satisfied }
    } else {
        fail(trace, plan.len(), FailureReason::GoalNotSatisfied)
    }
}
