//! Abstract syntax for the numeric STRIPS subset of PDDL.
//!
//! Identifiers are stored lowercase. Variables keep their leading `?`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::rational::Rational;

/// Root of the type hierarchy, always implicitly declared.
pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
    Fluents,
    NumericFluents,
    Equality,
}

impl Requirement {
    pub const ALL: [Requirement; 6] = [
        Requirement::Strips,
        Requirement::Typing,
        Requirement::NegativePreconditions,
        Requirement::Fluents,
        Requirement::NumericFluents,
        Requirement::Equality,
    ];

    /// Flag name without the leading colon.
    pub fn name(self) -> &'static str {
        match self {
            Requirement::Strips => "strips",
            Requirement::Typing => "typing",
            Requirement::NegativePreconditions => "negative-preconditions",
            Requirement::Fluents => "fluents",
            Requirement::NumericFluents => "numeric-fluents",
            Requirement::Equality => "equality",
        }
    }

    /// Parses a flag written with its leading colon, e.g. `:typing`.
    pub fn from_flag(flag: &str) -> Option<Requirement> {
        let bare = flag.strip_prefix(':')?;
        Requirement::ALL.into_iter().find(|r| r.name() == bare)
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":{}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    /// `None` means the implicit root `object`.
    pub parent: Option<String>,
}

impl TypeDecl {
    pub fn new(name: impl Into<String>, parent: Option<&str>) -> Self {
        let parent = parent.filter(|p| *p != ROOT_TYPE).map(str::to_string);
        TypeDecl { name: name.into(), parent }
    }
}

/// A typed variable (`?x - t`) or typed object (`o - t`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Typed {
    pub name: String,
    pub ty: String,
}

impl Typed {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Typed { name: name.into(), ty: ty.into() }
    }
}

/// Declaration of a predicate or numeric function: name plus typed parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Typed>,
}

pub type PredicateDecl = Signature;
pub type FunctionDecl = Signature;

impl Signature {
    pub fn new(name: impl Into<String>, params: Vec<Typed>) -> Self {
        Signature { name: name.into(), params }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Same arity and parameter types; variable names are irrelevant.
    pub fn same_shape(&self, other: &Signature) -> bool {
        self.name == other.name
            && self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| a.ty == b.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Object(String),
}

impl Term {
    pub fn parse(symbol: &str) -> Term {
        if symbol.starts_with('?') {
            Term::Var(symbol.to_string())
        } else {
            Term::Object(symbol.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Object(s) => s,
        }
    }
}

/// Predicate application; also used as the target shape of a fluent reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FluentRef {
    pub function: String,
    pub args: Vec<Term>,
}

impl FluentRef {
    pub fn new(function: impl Into<String>, args: Vec<Term>) -> Self {
        FluentRef { function: function.into(), args }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CompareOp> {
        Some(match s {
            "<" => CompareOp::Lt,
            "<=" => CompareOp::Le,
            "=" => CompareOp::Eq,
            ">=" => CompareOp::Ge,
            ">" => CompareOp::Gt,
            _ => return None,
        })
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    pub fn from_symbol(s: &str) -> Option<ArithOp> {
        Some(match s {
            "+" => ArithOp::Add,
            "-" => ArithOp::Sub,
            "*" => ArithOp::Mul,
            "/" => ArithOp::Div,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NumericOp {
    Increase,
    Decrease,
    Assign,
}

impl NumericOp {
    pub fn keyword(self) -> &'static str {
        match self {
            NumericOp::Increase => "increase",
            NumericOp::Decrease => "decrease",
            NumericOp::Assign => "assign",
        }
    }

    pub fn from_keyword(s: &str) -> Option<NumericOp> {
        Some(match s {
            "increase" => NumericOp::Increase,
            "decrease" => NumericOp::Decrease,
            "assign" => NumericOp::Assign,
            _ => return None,
        })
    }
}

/// Numeric expression. Boolean atoms cannot occur here by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NumExpr {
    Constant(Rational),
    Fluent(FluentRef),
    Binary(ArithOp, Box<NumExpr>, Box<NumExpr>),
}

impl NumExpr {
    pub fn constant(value: impl Into<Rational>) -> Self {
        NumExpr::Constant(value.into())
    }

    pub fn binary(op: ArithOp, lhs: NumExpr, rhs: NumExpr) -> Self {
        NumExpr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn for_each_fluent<'a>(&'a self, f: &mut impl FnMut(&'a FluentRef)) {
        match self {
            NumExpr::Constant(_) => {}
            NumExpr::Fluent(r) => f(r),
            NumExpr::Binary(_, a, b) => {
                a.for_each_fluent(f);
                b.for_each_fluent(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Atom(Atom),
    Not(Box<Condition>),
    And(Vec<Condition>),
    Compare(CompareOp, NumExpr, NumExpr),
    /// Object identity under `:equality`.
    Equals(Term, Term),
}

impl Default for Condition {
    fn default() -> Self {
        Condition::empty()
    }
}

impl Condition {
    pub fn empty() -> Self {
        Condition::And(Vec::new())
    }

    /// Conjuncts after flattening nested `and`s. `Not`, `Compare` and
    /// `Equals` each count as one conjunct.
    pub fn conjuncts(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Condition, out: &mut Vec<&'a Condition>) {
            match c {
                Condition::And(cs) => cs.iter().for_each(|c| walk(c, out)),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Condition::Atom(a) => f(a),
            Condition::Not(c) => c.for_each_atom(f),
            Condition::And(cs) => cs.iter().for_each(|c| c.for_each_atom(f)),
            Condition::Compare(..) | Condition::Equals(..) => {}
        }
    }

    pub fn for_each_fluent<'a>(&'a self, f: &mut impl FnMut(&'a FluentRef)) {
        match self {
            Condition::Atom(_) | Condition::Equals(..) => {}
            Condition::Not(c) => c.for_each_fluent(f),
            Condition::And(cs) => cs.iter().for_each(|c| c.for_each_fluent(f)),
            Condition::Compare(_, a, b) => {
                a.for_each_fluent(f);
                b.for_each_fluent(f);
            }
        }
    }

    /// Names of every predicate and function the condition mentions.
    pub fn fluent_names(&self) -> BTreeSet<&str> {
        let mut names = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            names.insert(a.predicate.as_str());
        });
        self.for_each_fluent(&mut |r| {
            names.insert(r.function.as_str());
        });
        names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Effect {
    Add(Atom),
    Delete(Atom),
    Numeric(NumericOp, FluentRef, NumExpr),
    And(Vec<Effect>),
}

impl Effect {
    pub fn empty() -> Self {
        Effect::And(Vec::new())
    }

    /// Primitive effects after flattening nested `and`s.
    pub fn literals(&self) -> Vec<&Effect> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Effect, out: &mut Vec<&'a Effect>) {
            match e {
                Effect::And(es) => es.iter().for_each(|e| walk(e, out)),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Fluent name the primitive effect writes. `None` for `And`.
    pub fn target_name(&self) -> Option<&str> {
        match self {
            Effect::Add(a) | Effect::Delete(a) => Some(&a.predicate),
            Effect::Numeric(_, r, _) => Some(&r.function),
            Effect::And(_) => None,
        }
    }

    /// Names of every predicate and function written or read by the effect.
    pub fn fluent_names(&self) -> BTreeSet<&str> {
        let mut names = BTreeSet::new();
        for lit in self.literals() {
            match lit {
                Effect::Add(a) | Effect::Delete(a) => {
                    names.insert(a.predicate.as_str());
                }
                Effect::Numeric(_, target, value) => {
                    names.insert(target.function.as_str());
                    value.for_each_fluent(&mut |r| {
                        names.insert(r.function.as_str());
                    });
                }
                Effect::And(_) => {}
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub params: Vec<Typed>,
    pub precondition: Condition,
    pub effect: Effect,
}

impl Action {
    /// Every fluent name referenced in precondition or effect.
    pub fn fluent_names(&self) -> BTreeSet<&str> {
        let mut names = self.precondition.fluent_names();
        names.extend(self.effect.fluent_names());
        names
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: BTreeSet<Requirement>,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub functions: Vec<FunctionDecl>,
    pub actions: Vec<Action>,
}

impl Domain {
    pub fn new(name: impl Into<String>) -> Self {
        Domain { name: name.into(), ..Domain::default() }
    }

    pub fn action(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|p| p.name == name)
    }

    pub fn type_hierarchy(&self) -> TypeHierarchy {
        TypeHierarchy::new(&self.types)
    }
}

/// Parent lookup over declared types with the implicit root.
#[derive(Debug, Clone, Default)]
pub struct TypeHierarchy {
    parents: BTreeMap<String, String>,
}

impl TypeHierarchy {
    pub fn new(types: &[TypeDecl]) -> Self {
        let parents =
            types.iter().map(|t| (t.name.clone(), t.parent.clone().unwrap_or_else(|| ROOT_TYPE.to_string()))).collect();
        TypeHierarchy { parents }
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.parents.contains_key(ty)
    }

    /// True when `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == ROOT_TYPE {
            return true;
        }
        let mut cur = sub;
        // bounded walk guards against cyclic declarations
        for _ in 0..=self.parents.len() {
            if cur == sup {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }
}

/// A ground atom or ground fluent: name plus object arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ground {
    pub name: String,
    pub args: Vec<String>,
}

impl Ground {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        Ground { name: name.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for Ground {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<Typed>,
    pub init_atoms: BTreeSet<Ground>,
    pub init_fluents: BTreeMap<Ground, Rational>,
    pub goal: Condition,
}

impl Problem {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.ty.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    pub args: Vec<String>,
}

impl PlanStep {
    pub fn new(action: impl Into<String>, args: &[&str]) -> Self {
        PlanStep { action: action.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.action)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
