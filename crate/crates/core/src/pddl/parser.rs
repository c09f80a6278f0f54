//! Builds and checks ASTs from s-expressions.
//!
//! The same analyzer serves four entry points: domain parsing, problem
//! parsing, strict domain checking against an externally supplied type list,
//! and single-action fragment checking against a fluent registry. Each AST
//! node yields at most one diagnostic.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::rational::parse_decimal;
use super::render::render_signature;
use super::sexpr::{read_all, SExpr};
use crate::diagnostics::{Category, Code, Diagnostic, Location};

/// Names a fluent may not take.
pub const RESERVED_WORDS: &[&str] = &[
    "and",
    "or",
    "not",
    "exists",
    "forall",
    "when",
    "increase",
    "decrease",
    "assign",
    "define",
    "domain",
    "problem",
    "object",
    "number",
    "<",
    "<=",
    "=",
    ">=",
    ">",
    "+",
    "-",
    "*",
    "/",
    "strips",
    "typing",
    "negative-preconditions",
    "fluents",
    "numeric-fluents",
    "equality",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED_WORDS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Section {
    Types,
    Predicates,
    Functions,
    Parameters,
    Preconditions,
    Effects,
    Objects,
    Init,
    Goal,
}

impl Section {
    fn label(self) -> &'static str {
        match self {
            Section::Types => "Types",
            Section::Predicates => "Predicates",
            Section::Functions => "Functions",
            Section::Parameters => "Parameters",
            Section::Preconditions => "Preconditions",
            Section::Effects => "Effects",
            Section::Objects => "Objects",
            Section::Init => "Init",
            Section::Goal => "Goal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluentKind {
    Predicate,
    Function,
}

impl FluentKind {
    fn word(self) -> &'static str {
        match self {
            FluentKind::Predicate => "predicate",
            FluentKind::Function => "function",
        }
    }

    fn format(self) -> Category {
        match self {
            FluentKind::Predicate => Category::PredicateFormat,
            FluentKind::Function => Category::FunctionFormat,
        }
    }

    fn usage(self) -> Category {
        match self {
            FluentKind::Predicate => Category::PredicateUsage,
            FluentKind::Function => Category::FunctionUsage,
        }
    }

    fn naming(self) -> Category {
        match self {
            FluentKind::Predicate => Category::PredicateName,
            FluentKind::Function => Category::FunctionName,
        }
    }
}

/// How argument terms resolve to types.
enum Scope<'a> {
    /// Variables bound by action parameters.
    Action(&'a BTreeMap<String, String>),
    /// Objects declared in a problem.
    Ground(&'a BTreeMap<String, String>),
}

pub(crate) struct Analyzer {
    hierarchy: TypeHierarchy,
    /// When set, types used in declarations and parameters must come from here.
    allowed_types: Option<BTreeSet<String>>,
    reserved_names: bool,
    /// Fluent-signature conflicts against pre-existing declarations are usage
    /// errors (fragment mode) rather than naming errors.
    registry_mode: bool,
    preexisting: BTreeSet<String>,
    pub(crate) predicates: BTreeMap<String, Signature>,
    pub(crate) functions: BTreeMap<String, Signature>,
    pub(crate) predicate_order: Vec<String>,
    pub(crate) function_order: Vec<String>,
    pub(crate) requirements: BTreeSet<Requirement>,
    pub(crate) diags: Vec<Diagnostic>,
}

impl Analyzer {
    pub(crate) fn new() -> Self {
        Analyzer {
            hierarchy: TypeHierarchy::default(),
            allowed_types: None,
            reserved_names: false,
            registry_mode: false,
            preexisting: BTreeSet::new(),
            predicates: BTreeMap::new(),
            functions: BTreeMap::new(),
            predicate_order: Vec::new(),
            function_order: Vec::new(),
            requirements: BTreeSet::new(),
            diags: Vec::new(),
        }
    }

    /// Analyzer whose types and fluents come from an already-parsed domain.
    pub(crate) fn from_domain(dom: &Domain) -> Self {
        let mut a = Analyzer::new();
        a.hierarchy = dom.type_hierarchy();
        for p in &dom.predicates {
            a.predicates.insert(p.name.clone(), p.clone());
            a.predicate_order.push(p.name.clone());
        }
        for f in &dom.functions {
            a.functions.insert(f.name.clone(), f.clone());
            a.function_order.push(f.name.clone());
        }
        a.requirements = dom.requirements.clone();
        a
    }

    /// Restricts types to an external list and enables reserved-name checks.
    pub(crate) fn strict(mut self, types: &[TypeDecl]) -> Self {
        let mut allowed: BTreeSet<String> = types.iter().map(|t| t.name.clone()).collect();
        allowed.insert(ROOT_TYPE.to_string());
        self.hierarchy = TypeHierarchy::new(types);
        self.allowed_types = Some(allowed);
        self.reserved_names = true;
        self
    }

    /// Seeds fluents from a registry; conflicting re-declarations become
    /// usage errors.
    pub(crate) fn with_registry<'a>(mut self, fluents: impl IntoIterator<Item = (FluentKind, &'a Signature)>) -> Self {
        for (kind, sig) in fluents {
            self.preexisting.insert(sig.name.clone());
            match kind {
                FluentKind::Predicate => {
                    self.predicate_order.push(sig.name.clone());
                    self.predicates.insert(sig.name.clone(), sig.clone());
                }
                FluentKind::Function => {
                    self.function_order.push(sig.name.clone());
                    self.functions.insert(sig.name.clone(), sig.clone());
                }
            }
        }
        self.registry_mode = true;
        self
    }

    fn push(&mut self, category: Category, code: Code, at: &SExpr, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(category, code, at.location(), message));
    }

    fn push_diag(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }

    fn type_known(&self, ty: &str) -> bool {
        match &self.allowed_types {
            Some(allowed) => allowed.contains(ty),
            None => self.hierarchy.contains(ty),
        }
    }

    fn unknown_type(&mut self, ty: &str, what: &str, section: Section, at: &SExpr) {
        let (code, message) = if self.allowed_types.is_some() {
            let mut names: Vec<&str> = self.hierarchy.names().collect();
            names.insert(0, ROOT_TYPE);
            (
                Code::TypeNotInExtern,
                format!(
                    "The type `{ty}` of {what} in `{}` does not match any declared type ({}).",
                    section.label(),
                    names.join(", ")
                ),
            )
        } else {
            (Code::UndeclaredType, format!("The type `{ty}` of {what} in `{}` is not declared.", section.label()))
        };
        self.push(Category::ObjectType, code, at, message);
    }

    // ---- declarations -------------------------------------------------

    pub(crate) fn requirements_section(&mut self, items: &[SExpr]) {
        for item in items {
            match item.symbol() {
                Some(flag) => match Requirement::from_flag(flag) {
                    Some(r) => {
                        self.requirements.insert(r);
                    }
                    None => self.push(
                        Category::Lexical,
                        Code::UnknownRequirement,
                        item,
                        format!("Unknown or unsupported requirement flag `{flag}`."),
                    ),
                },
                None => self.push(
                    Category::Lexical,
                    Code::MalformedStructure,
                    item,
                    "Requirement flags must be symbols such as `:typing`.",
                ),
            }
        }
    }

    /// Splits a typed list `a b - t c` into `(name, type, node)` triples.
    /// Untyped trailing names get the root type.
    fn typed_list<'s>(
        &mut self,
        items: &'s [SExpr],
        category: Category,
        section: Section,
    ) -> Option<Vec<(String, String, &'s SExpr)>> {
        let mut out = Vec::new();
        let mut pending: Vec<&SExpr> = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let item = &items[i];
            match item.symbol() {
                Some("-") => {
                    let Some(next) = items.get(i + 1) else {
                        self.push(
                            category,
                            Code::MalformedStructure,
                            item,
                            format!("Dangling `-` without a type in `{}`.", section.label()),
                        );
                        return None;
                    };
                    let Some(ty) = next.symbol().filter(|t| *t != "-") else {
                        let code = if next.head() == Some("either") {
                            Code::UnsupportedConstruct
                        } else {
                            Code::MalformedStructure
                        };
                        self.push(
                            category,
                            code,
                            next,
                            format!("Expected a type name after `-` in `{}`.", section.label()),
                        );
                        return None;
                    };
                    if pending.is_empty() {
                        self.push(
                            category,
                            Code::MalformedStructure,
                            item,
                            format!("Type `{ty}` in `{}` is not attached to any name.", section.label()),
                        );
                        return None;
                    }
                    for p in pending.drain(..) {
                        out.push((p.symbol().unwrap().to_string(), ty.to_string(), p));
                    }
                    i += 2;
                }
                Some(_) => {
                    pending.push(item);
                    i += 1;
                }
                None => {
                    self.push(
                        category,
                        Code::MalformedStructure,
                        item,
                        format!("Unexpected nested expression `{}` in `{}`.", item.to_compact(), section.label()),
                    );
                    return None;
                }
            }
        }
        for p in pending {
            out.push((p.symbol().unwrap().to_string(), ROOT_TYPE.to_string(), p));
        }
        Some(out)
    }

    pub(crate) fn types_section(&mut self, items: &[SExpr]) -> Vec<TypeDecl> {
        let Some(entries) = self.typed_list(items, Category::ObjectType, Section::Types) else {
            return Vec::new();
        };
        let mut decls: Vec<TypeDecl> = Vec::new();
        let mut names = BTreeSet::new();
        for (name, _, node) in &entries {
            if name == ROOT_TYPE {
                continue;
            }
            if name.starts_with('?') || parse_decimal(name).is_some() {
                self.push(
                    Category::ObjectType,
                    Code::MalformedStructure,
                    node,
                    format!("`{name}` is not a valid type name."),
                );
                continue;
            }
            if !names.insert(name.clone()) {
                self.push(
                    Category::ObjectType,
                    Code::DuplicateDeclaration,
                    node,
                    format!("Type `{name}` is declared more than once."),
                );
                continue;
            }
        }
        let declared: BTreeSet<String> = names.clone();
        let mut seen = BTreeSet::new();
        for (name, parent, node) in entries {
            if name == ROOT_TYPE || !declared.contains(&name) || !seen.insert(name.clone()) {
                continue;
            }
            if parent != ROOT_TYPE && !declared.contains(&parent) {
                self.push(
                    Category::ObjectType,
                    Code::UndeclaredType,
                    node,
                    format!("Parent type `{parent}` of type `{name}` is not declared."),
                );
                continue;
            }
            decls.push(TypeDecl::new(name, Some(&parent)));
        }
        if self.allowed_types.is_none() {
            self.hierarchy = TypeHierarchy::new(&decls);
        }
        decls
    }

    /// Parses one fluent declaration `(name ?a - t ...)`.
    fn signature(&mut self, entry: &SExpr, kind: FluentKind) -> Option<Signature> {
        let section = match kind {
            FluentKind::Predicate => Section::Predicates,
            FluentKind::Function => Section::Functions,
        };
        let Some(items) = entry.list() else {
            self.push(
                kind.format(),
                Code::MalformedStructure,
                entry,
                format!("Expected a parenthesized {} declaration but found `{}`.", kind.word(), entry.to_compact()),
            );
            return None;
        };
        let Some(name) = items.first().and_then(SExpr::symbol) else {
            self.push(
                kind.format(),
                Code::MalformedStructure,
                entry,
                format!("A {} declaration must start with its name.", kind.word()),
            );
            return None;
        };
        if name.starts_with('?') || name.starts_with(':') || parse_decimal(name).is_some() {
            self.push(
                kind.format(),
                Code::MalformedStructure,
                entry,
                format!("`{name}` is not a valid {} name.", kind.word()),
            );
            return None;
        }
        let params = self.typed_list(&items[1..], kind.format(), section)?;
        let mut vars = BTreeSet::new();
        let mut out = Vec::new();
        for (var, ty, node) in params {
            if !var.starts_with('?') {
                self.push(
                    kind.format(),
                    Code::MalformedStructure,
                    node,
                    format!("Parameter `{var}` of {} `{name}` must be a variable starting with `?`.", kind.word()),
                );
                return None;
            }
            if !vars.insert(var.clone()) {
                self.push(
                    kind.format(),
                    Code::DuplicateDeclaration,
                    node,
                    format!("Parameter `{var}` appears twice in {} `{name}`.", kind.word()),
                );
                return None;
            }
            if !self.type_known(&ty) {
                self.unknown_type(&ty, &format!("parameter `{var}` of {} `{name}`", kind.word()), section, node);
                return None;
            }
            out.push(Typed::new(var, ty));
        }
        Some(Signature::new(name, out))
    }

    /// Registers a declaration, applying the naming rules. Returns true when
    /// the declaration is new (not an identical re-declaration).
    fn declare(&mut self, sig: Signature, kind: FluentKind, at: &SExpr) -> bool {
        let name = sig.name.clone();
        let (same, other) = match kind {
            FluentKind::Predicate => (&self.predicates, &self.functions),
            FluentKind::Function => (&self.functions, &self.predicates),
        };
        if let Some(existing) = same.get(&name) {
            if existing.same_shape(&sig) {
                return false;
            }
            let expected = render_signature(existing);
            if self.registry_mode && self.preexisting.contains(&name) {
                self.push(
                    kind.usage(),
                    Code::SignatureMismatch,
                    at,
                    format!(
                        "The {} `{name}` is already defined as `{expected}` and cannot be redefined with a different signature.",
                        kind.word()
                    ),
                );
            } else {
                self.push(
                    kind.naming(),
                    Code::DuplicateDeclaration,
                    at,
                    format!("The {} name `{name}` is declared twice with different parameters.", kind.word()),
                );
            }
            return false;
        }
        let conflict = if other.contains_key(&name) {
            let other_word = match kind {
                FluentKind::Predicate => "function",
                FluentKind::Function => "predicate",
            };
            Some(format!("The {} name `{name}` conflicts with an existing {other_word} name.", kind.word()))
        } else if self.hierarchy.contains(&name) || self.allowed_types.as_ref().is_some_and(|t| t.contains(&name)) {
            Some(format!("The {} name `{name}` conflicts with an object type.", kind.word()))
        } else if self.reserved_names && is_reserved(&name) {
            Some(format!("The {} name `{name}` conflicts with a PDDL keyword.", kind.word()))
        } else {
            None
        };
        if let Some(message) = conflict {
            let code =
                if self.reserved_names && is_reserved(&name) { Code::ReservedKeyword } else { Code::NameConflict };
            self.push(kind.naming(), code, at, message);
            return false;
        }
        match kind {
            FluentKind::Predicate => {
                self.predicate_order.push(name.clone());
                self.predicates.insert(name, sig);
            }
            FluentKind::Function => {
                self.function_order.push(name.clone());
                self.functions.insert(name, sig);
            }
        }
        true
    }

    pub(crate) fn predicates_section(&mut self, items: &[SExpr]) -> Vec<Signature> {
        let mut added = Vec::new();
        for entry in items {
            if let Some(sig) = self.signature(entry, FluentKind::Predicate) {
                if self.declare(sig.clone(), FluentKind::Predicate, entry) {
                    added.push(sig);
                }
            }
        }
        added
    }

    pub(crate) fn functions_section(&mut self, items: &[SExpr]) -> Vec<Signature> {
        let mut added = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let entry = &items[i];
            if entry.symbol() == Some("-") {
                match items.get(i + 1).and_then(SExpr::symbol) {
                    Some("number") => {}
                    _ => {
                        let at = items.get(i + 1).unwrap_or(entry);
                        self.push(
                            Category::FunctionFormat,
                            Code::MalformedStructure,
                            at,
                            "Functions must be declared with the return type `number`.",
                        );
                    }
                }
                i += 2;
                continue;
            }
            if let Some(sig) = self.signature(entry, FluentKind::Function) {
                if self.declare(sig.clone(), FluentKind::Function, entry) {
                    added.push(sig);
                }
            }
            i += 1;
        }
        added
    }

    // ---- terms and fluents --------------------------------------------

    fn term(
        &mut self,
        e: &SExpr,
        scope: &Scope,
        kind: FluentKind,
        head: &str,
        section: Section,
    ) -> Option<(Term, String)> {
        let Some(sym) = e.symbol() else {
            self.push(
                kind.format(),
                Code::MalformedStructure,
                e,
                format!(
                    "Argument `{}` of `{head}` in `{}` must be a variable or object, not a nested expression.",
                    e.to_compact(),
                    section.label()
                ),
            );
            return None;
        };
        if parse_decimal(sym).is_some() {
            self.push(
                kind.format(),
                Code::MalformedStructure,
                e,
                format!(
                    "Argument `{sym}` of `{head}` in `{}` must be a variable or object, not a number.",
                    section.label()
                ),
            );
            return None;
        }
        let term = Term::parse(sym);
        let ty = match (scope, &term) {
            (Scope::Action(vars), Term::Var(v)) => vars.get(v).cloned(),
            (Scope::Ground(objs), Term::Object(o)) => objs.get(o).cloned(),
            _ => None,
        };
        match ty {
            Some(ty) => Some((term, ty)),
            None => {
                let (code, message) = match term {
                    Term::Var(_) => (
                        Code::UnboundVariable,
                        format!(
                            "Variable `{sym}` used in `{head}` in `{}` is not a parameter of the action.",
                            section.label()
                        ),
                    ),
                    Term::Object(_) => (
                        Code::UnknownObject,
                        format!("Object `{sym}` used in `{head}` in `{}` is not declared.", section.label()),
                    ),
                };
                self.push(kind.usage(), code, e, message);
                None
            }
        }
    }

    /// Checks arguments of an application against its declaration.
    fn arguments(
        &mut self,
        e: &SExpr,
        items: &[SExpr],
        decl: &Signature,
        kind: FluentKind,
        scope: &Scope,
        section: Section,
    ) -> Option<Vec<Term>> {
        let head = &decl.name;
        let args = &items[1..];
        // format problems inside the arguments take precedence over usage
        for a in args {
            if a.symbol().is_none() || a.symbol().and_then(parse_decimal).is_some() {
                return self.term(a, scope, kind, head, section).map(|_| Vec::new());
            }
        }
        if args.len() != decl.arity() {
            self.push(
                kind.usage(),
                Code::ArityMismatch,
                e,
                format!(
                    "The {} `{head}` in `{}` expects {} argument(s) but got {}; it is defined as `{}`.",
                    kind.word(),
                    section.label(),
                    decl.arity(),
                    args.len(),
                    render_signature(decl)
                ),
            );
            return None;
        }
        let mut out = Vec::with_capacity(args.len());
        for (a, param) in args.iter().zip(&decl.params) {
            let (term, ty) = self.term(a, scope, kind, head, section)?;
            if !self.hierarchy.is_subtype(&ty, &param.ty) {
                self.push(
                    kind.usage(),
                    Code::ArgumentType,
                    a,
                    format!(
                        "Argument `{}` of the {} `{head}` in `{}` has type `{ty}` but `{}` is expected.",
                        term.as_str(),
                        kind.word(),
                        section.label(),
                        param.ty
                    ),
                );
                return None;
            }
            out.push(term);
        }
        Some(out)
    }

    fn atom(&mut self, e: &SExpr, scope: &Scope, section: Section) -> Option<Atom> {
        let items = e.list()?;
        let head = items[0].symbol()?.to_string();
        if self.functions.contains_key(&head) {
            self.push_diag(
                Diagnostic::new(
                    Category::PredicateUsage,
                    Code::WrongKind,
                    e.location(),
                    format!("Head `{head}` in `{}` is a function but should be a predicate.", section.label()),
                )
                .with_suggestion(Category::PredicateUsage.guidance()),
            );
            return None;
        }
        let Some(decl) = self.predicates.get(&head).cloned() else {
            self.push(
                Category::PredicateUsage,
                Code::UndeclaredFluent,
                e,
                format!("The predicate `{head}` in `{}` is not defined.", section.label()),
            );
            return None;
        };
        let args = self.arguments(e, items, &decl, FluentKind::Predicate, scope, section)?;
        Some(Atom::new(head, args))
    }

    fn fluent_ref(&mut self, e: &SExpr, scope: &Scope, section: Section) -> Option<FluentRef> {
        let items = e.list()?;
        let head = items[0].symbol()?.to_string();
        if self.predicates.contains_key(&head) {
            self.push_diag(
                Diagnostic::new(
                    Category::NumericUsage,
                    Code::WrongKind,
                    e.location(),
                    format!("Head `{head}` in `{}` is a predicate but should be a function.", section.label()),
                )
                .with_suggestion(Category::FunctionUsage.guidance()),
            );
            return None;
        }
        let Some(decl) = self.functions.get(&head).cloned() else {
            self.push(
                Category::FunctionUsage,
                Code::UndeclaredFluent,
                e,
                format!("The function `{head}` in `{}` is not defined.", section.label()),
            );
            return None;
        };
        let args = self.arguments(e, items, &decl, FluentKind::Function, scope, section)?;
        Some(FluentRef::new(head, args))
    }

    // ---- expressions --------------------------------------------------

    fn num_expr(&mut self, e: &SExpr, scope: &Scope, section: Section) -> Option<NumExpr> {
        let items = match e {
            SExpr::Symbol { text, .. } => {
                if let Some(v) = parse_decimal(text) {
                    return Some(NumExpr::Constant(v));
                }
                self.push(
                    Category::NumericUsage,
                    Code::BadOperand,
                    e,
                    format!(
                        "`{text}` in `{}` is used as a numeric operand but is neither a number nor a function.",
                        section.label()
                    ),
                );
                return None;
            }
            SExpr::List { items, .. } => items,
        };
        let Some(head) = items.first().and_then(SExpr::symbol) else {
            self.push(
                Category::FunctionFormat,
                Code::MalformedStructure,
                e,
                format!("`{}` in `{}` is not a valid numeric expression.", e.to_compact(), section.label()),
            );
            return None;
        };
        if let Some(op) = ArithOp::from_symbol(head) {
            let operands = &items[1..];
            let ok = match op {
                ArithOp::Sub => matches!(operands.len(), 1 | 2),
                ArithOp::Div => operands.len() == 2,
                ArithOp::Add | ArithOp::Mul => operands.len() >= 2,
            };
            if !ok {
                self.push(
                    Category::NumericUsage,
                    Code::ArityMismatch,
                    e,
                    format!(
                        "The operator `{head}` in `{}` got {} operand(s); it expects two.",
                        section.label(),
                        operands.len()
                    ),
                );
                return None;
            }
            let mut values = Vec::with_capacity(operands.len());
            for o in operands {
                values.push(self.num_expr(o, scope, section)?);
            }
            if op == ArithOp::Sub && values.len() == 1 {
                let v = values.pop().unwrap();
                return Some(NumExpr::binary(ArithOp::Sub, NumExpr::constant(super::rational::int(0)), v));
            }
            let mut it = values.into_iter();
            let first = it.next().unwrap();
            return Some(it.fold(first, |acc, v| NumExpr::binary(op, acc, v)));
        }
        if CompareOp::from_symbol(head).is_some()
            || NumericOp::from_keyword(head).is_some()
            || matches!(head, "and" | "not" | "or")
        {
            self.push(
                Category::NumericUsage,
                Code::MisplacedOperator,
                e,
                format!("`{head}` in `{}` cannot be used inside a numeric expression.", section.label()),
            );
            return None;
        }
        self.fluent_ref(e, scope, section).map(NumExpr::Fluent)
    }

    fn condition(&mut self, e: &SExpr, scope: &Scope, section: Section) -> Option<Condition> {
        let Some(items) = e.list() else {
            self.push(
                Category::PredicateFormat,
                Code::MalformedStructure,
                e,
                format!("Expected a parenthesized condition in `{}` but found `{}`.", section.label(), e.to_compact()),
            );
            return None;
        };
        if items.is_empty() {
            return Some(Condition::empty());
        }
        let Some(head) = items[0].symbol() else {
            self.push(
                Category::PredicateFormat,
                Code::MalformedStructure,
                e,
                format!("A condition in `{}` must start with a predicate name or connective.", section.label()),
            );
            return None;
        };
        match head {
            "and" => {
                let parts: Vec<Condition> =
                    items[1..].iter().filter_map(|c| self.condition(c, scope, section)).collect();
                Some(Condition::And(parts))
            }
            "not" => {
                if items.len() != 2 {
                    self.push(
                        Category::PredicateFormat,
                        Code::MalformedStructure,
                        e,
                        format!("`not` in `{}` takes exactly one condition.", section.label()),
                    );
                    return None;
                }
                self.condition(&items[1], scope, section).map(|c| Condition::Not(Box::new(c)))
            }
            "or" | "imply" | "exists" | "forall" | "when" => {
                self.push(
                    Category::PredicateFormat,
                    Code::UnsupportedConstruct,
                    e,
                    format!(
                        "`{head}` in `{}` is not supported; use conjunctions of literals and comparisons.",
                        section.label()
                    ),
                );
                None
            }
            _ if CompareOp::from_symbol(head).is_some() => {
                let op = CompareOp::from_symbol(head).unwrap();
                if items.len() != 3 {
                    self.push(
                        Category::NumericUsage,
                        Code::ArityMismatch,
                        e,
                        format!("The comparison `{head}` in `{}` expects two operands.", section.label()),
                    );
                    return None;
                }
                let is_term = |x: &SExpr| x.symbol().is_some_and(|s| parse_decimal(s).is_none());
                if op == CompareOp::Eq && is_term(&items[1]) && is_term(&items[2]) {
                    let (a, _) = self.term(&items[1], scope, FluentKind::Predicate, "=", section)?;
                    let (b, _) = self.term(&items[2], scope, FluentKind::Predicate, "=", section)?;
                    return Some(Condition::Equals(a, b));
                }
                let lhs = self.num_expr(&items[1], scope, section)?;
                let rhs = self.num_expr(&items[2], scope, section)?;
                Some(Condition::Compare(op, lhs, rhs))
            }
            _ if ArithOp::from_symbol(head).is_some() => {
                // operand errors are more specific than the misplacement itself
                self.num_expr(e, scope, section)?;
                self.push(
                    Category::NumericUsage,
                    Code::MisplacedOperator,
                    e,
                    format!(
                        "The arithmetic expression `{}` in `{}` is not a condition; compare it with <, <=, =, >= or >.",
                        e.to_compact(),
                        section.label()
                    ),
                );
                None
            }
            _ if NumericOp::from_keyword(head).is_some() => {
                self.push(
                    Category::NumericUsage,
                    Code::MisplacedOperator,
                    e,
                    format!("The numeric effect `{head}` cannot appear in `{}`.", section.label()),
                );
                None
            }
            _ => self.atom(e, scope, section).map(Condition::Atom),
        }
    }

    fn effect(&mut self, e: &SExpr, scope: &Scope) -> Option<Effect> {
        let section = Section::Effects;
        let Some(items) = e.list() else {
            self.push(
                Category::PredicateFormat,
                Code::MalformedStructure,
                e,
                format!("Expected a parenthesized effect but found `{}`.", e.to_compact()),
            );
            return None;
        };
        if items.is_empty() {
            return Some(Effect::empty());
        }
        let Some(head) = items[0].symbol() else {
            self.push(
                Category::PredicateFormat,
                Code::MalformedStructure,
                e,
                "An effect must start with a predicate name or `and`, `not`, `increase`, `decrease`, `assign`.",
            );
            return None;
        };
        match head {
            "and" => Some(Effect::And(items[1..].iter().filter_map(|x| self.effect(x, scope)).collect())),
            "not" => {
                let inner = match items {
                    [_, inner] if inner.head().is_some_and(|h| !is_reserved(h)) => inner,
                    _ => {
                        self.push(
                            Category::PredicateFormat,
                            Code::MalformedStructure,
                            e,
                            "`not` in `Effects` must wrap exactly one predicate.",
                        );
                        return None;
                    }
                };
                self.atom(inner, scope, section).map(Effect::Delete)
            }
            "forall" | "when" | "or" | "exists" => {
                self.push(
                    Category::PredicateFormat,
                    Code::UnsupportedConstruct,
                    e,
                    format!("`{head}` in `Effects` is not supported."),
                );
                None
            }
            _ if NumericOp::from_keyword(head).is_some() => {
                let op = NumericOp::from_keyword(head).unwrap();
                if items.len() != 3 {
                    self.push(
                        Category::NumericUsage,
                        Code::ArityMismatch,
                        e,
                        format!("`{head}` in `Effects` expects a function and a value."),
                    );
                    return None;
                }
                let target_node = &items[1];
                if target_node.head().is_none() {
                    self.push(
                        Category::NumericUsage,
                        Code::BadOperand,
                        target_node,
                        format!("The target of `{head}` in `Effects` must be a function such as `(energy ?u)`."),
                    );
                    return None;
                }
                let target = self.fluent_ref(target_node, scope, section)?;
                let value = self.num_expr(&items[2], scope, section)?;
                Some(Effect::Numeric(op, target, value))
            }
            _ if CompareOp::from_symbol(head).is_some() || ArithOp::from_symbol(head).is_some() => {
                self.push(
                    Category::NumericUsage,
                    Code::MisplacedOperator,
                    e,
                    format!("`{head}` cannot appear directly in `Effects`; use increase, decrease or assign."),
                );
                None
            }
            _ => self.atom(e, scope, section).map(Effect::Add),
        }
    }

    // ---- actions ------------------------------------------------------

    pub(crate) fn action(&mut self, e: &SExpr, taken_names: &BTreeSet<String>) -> Option<Action> {
        let items = e.list()?;
        let Some(name) = items.get(1).and_then(SExpr::symbol).filter(|n| !n.starts_with(':')) else {
            self.push(Category::Lexical, Code::MalformedStructure, e, "`:action` must be followed by the action name.");
            return None;
        };
        let name = name.to_string();
        let mut ok = true;
        if taken_names.contains(&name) {
            self.push(
                Category::Lexical,
                Code::DuplicateDeclaration,
                e,
                format!("The action `{name}` is defined more than once."),
            );
            ok = false;
        } else if self.predicates.contains_key(&name) {
            self.push(
                Category::PredicateName,
                Code::NameConflict,
                e,
                format!("The action name `{name}` conflicts with an existing predicate name."),
            );
            ok = false;
        } else if self.functions.contains_key(&name) {
            self.push(
                Category::FunctionName,
                Code::NameConflict,
                e,
                format!("The action name `{name}` conflicts with an existing function name."),
            );
            ok = false;
        } else if self.hierarchy.contains(&name) {
            self.push(
                Category::ObjectType,
                Code::NameConflict,
                e,
                format!("The action name `{name}` conflicts with an object type."),
            );
            ok = false;
        }

        let mut params_node = None;
        let mut pre_node = None;
        let mut eff_node = None;
        let mut i = 2;
        while i < items.len() {
            let key = &items[i];
            let value = items.get(i + 1);
            let slot = match key.symbol() {
                Some(":parameters") => &mut params_node,
                Some(":precondition") => &mut pre_node,
                Some(":effect") => &mut eff_node,
                _ => {
                    self.push(
                        Category::Lexical,
                        Code::UnknownSection,
                        key,
                        format!(
                            "Unexpected `{}` in action `{name}`; expected :parameters, :precondition or :effect.",
                            key.to_compact()
                        ),
                    );
                    return None;
                }
            };
            let Some(value) = value else {
                self.push(
                    Category::Lexical,
                    Code::MalformedStructure,
                    key,
                    format!("`{}` in action `{name}` has no value.", key.to_compact()),
                );
                return None;
            };
            *slot = Some(value);
            i += 2;
        }

        let mut params = Vec::new();
        let mut vars = BTreeMap::new();
        if let Some(node) = params_node {
            let Some(items) = node.list() else {
                self.push(
                    Category::Lexical,
                    Code::MalformedStructure,
                    node,
                    "`:parameters` must be a parenthesized list.",
                );
                return None;
            };
            let entries = self.typed_list(items, Category::ObjectType, Section::Parameters)?;
            for (var, ty, pnode) in entries {
                if !var.starts_with('?') {
                    self.push(
                        Category::Lexical,
                        Code::MalformedStructure,
                        pnode,
                        format!("Parameter `{var}` of action `{name}` must be a variable starting with `?`."),
                    );
                    return None;
                }
                if vars.contains_key(&var) {
                    self.push(
                        Category::Lexical,
                        Code::DuplicateDeclaration,
                        pnode,
                        format!("Parameter `{var}` appears twice in action `{name}`."),
                    );
                    return None;
                }
                if !self.type_known(&ty) {
                    self.unknown_type(&ty, &format!("parameter `{var}`"), Section::Parameters, pnode);
                    return None;
                }
                vars.insert(var.clone(), ty.clone());
                params.push(Typed::new(var, ty));
            }
        }
        let scope = Scope::Action(&vars);
        let precondition = match pre_node {
            Some(n) => self.condition(n, &scope, Section::Preconditions),
            None => Some(Condition::empty()),
        };
        let effect = match eff_node {
            Some(n) => self.effect(n, &scope),
            None => Some(Effect::empty()),
        };
        if !ok {
            return None;
        }
        Some(Action { name, params, precondition: precondition?, effect: effect? })
    }

    pub(crate) fn ordered_predicates(&self) -> Vec<Signature> {
        self.predicate_order.iter().filter_map(|n| self.predicates.get(n).cloned()).collect()
    }

    pub(crate) fn ordered_functions(&self) -> Vec<Signature> {
        self.function_order.iter().filter_map(|n| self.functions.get(n).cloned()).collect()
    }
}

fn structure_error(at: Option<&SExpr>, message: &str) -> Diagnostic {
    let loc = at.map(SExpr::location).unwrap_or_else(|| Location::new(1, 1, ""));
    Diagnostic::new(Category::Lexical, Code::MalformedStructure, loc, message)
}

/// Unwraps `(define (<kind> name) sections...)`.
fn define_form<'a>(top: &'a [SExpr], kind: &str) -> Result<(String, &'a [SExpr]), Diagnostic> {
    let expected = format!("Expected a single `(define ({kind} <name>) ...)` form.");
    let [root] = top else {
        return Err(structure_error(top.get(1).or(top.first()), &expected));
    };
    let items = root.list().ok_or_else(|| structure_error(Some(root), &expected))?;
    if items.first().and_then(SExpr::symbol) != Some("define") {
        return Err(structure_error(Some(root), &expected));
    }
    let header = items.get(1).ok_or_else(|| structure_error(Some(root), &expected))?;
    match header.list() {
        Some([k, n]) if k.symbol() == Some(kind) && n.symbol().is_some() => {
            Ok((n.symbol().unwrap().to_string(), &items[2..]))
        }
        _ => Err(structure_error(Some(header), &expected)),
    }
}

fn section_items(e: &SExpr) -> Option<(&str, &[SExpr])> {
    let items = e.list()?;
    let head = items.first()?.symbol()?;
    Some((head, &items[1..]))
}

/// Runs an analyzer over the sections of a domain document.
pub(crate) fn analyze_domain(text: &str, mut an: Analyzer) -> Result<Domain, Vec<Diagnostic>> {
    let (top, lex) = read_all(text);
    if !lex.is_empty() {
        return Err(lex);
    }
    let (name, sections) = define_form(&top, "domain").map_err(|d| vec![d])?;
    let mut dom = Domain::new(name);

    // declarations first so actions may precede them in the text
    let mut action_nodes = Vec::new();
    let mut grouped: [Vec<&[SExpr]>; 4] = Default::default();
    for s in sections {
        match section_items(s) {
            Some((":requirements", items)) => grouped[0].push(items),
            Some((":types", items)) => grouped[1].push(items),
            Some((":predicates", items)) => grouped[2].push(items),
            Some((":functions", items)) => grouped[3].push(items),
            Some((":action", _)) => action_nodes.push(s),
            Some((other, _)) => an.push(
                Category::Lexical,
                Code::UnknownSection,
                s,
                format!("Unknown or unsupported domain section `{other}`."),
            ),
            None => an.push(Category::Lexical, Code::MalformedStructure, s, "Expected a parenthesized domain section."),
        }
    }
    for items in &grouped[0] {
        an.requirements_section(items);
    }
    for items in &grouped[1] {
        dom.types.extend(an.types_section(items));
    }
    for items in &grouped[2] {
        an.predicates_section(items);
    }
    for items in &grouped[3] {
        an.functions_section(items);
    }
    let mut names = BTreeSet::new();
    for node in action_nodes {
        if let Some(a) = an.action(node, &names) {
            names.insert(a.name.clone());
            dom.actions.push(a);
        } else if let Some(n) = node.list().and_then(|i| i.get(1)).and_then(SExpr::symbol) {
            names.insert(n.to_string());
        }
    }
    if !an.diags.is_empty() {
        return Err(an.diags);
    }
    dom.requirements = an.requirements.clone();
    dom.predicates = an.ordered_predicates();
    dom.functions = an.ordered_functions();
    Ok(dom)
}

/// Parses a domain document. Identifiers are lowercased.
pub fn parse_domain(text: &str) -> Result<Domain, Vec<Diagnostic>> {
    analyze_domain(text, Analyzer::new())
}

/// Parses a problem document and type-checks it against `dom`.
pub fn parse_problem(text: &str, dom: &Domain) -> Result<Problem, Vec<Diagnostic>> {
    let (top, lex) = read_all(text);
    if !lex.is_empty() {
        return Err(lex);
    }
    let (name, sections) = define_form(&top, "problem").map_err(|d| vec![d])?;
    let mut an = Analyzer::from_domain(dom);
    let mut prob = Problem { name, goal: Condition::empty(), ..Problem::default() };
    let mut objects_node = Vec::new();
    let mut init_node = Vec::new();
    let mut goal_node = None;
    for s in sections {
        match section_items(s) {
            Some((":domain", [d])) if d.symbol().is_some() => prob.domain_name = d.symbol().unwrap().to_string(),
            Some((":requirements", items)) => an.requirements_section(items),
            Some((":objects", items)) => objects_node.push(items),
            Some((":init", items)) => init_node.push(items),
            Some((":goal", [g])) => goal_node = Some(g),
            Some((":metric", _)) => {}
            Some((other, _)) => an.push(
                Category::Lexical,
                Code::UnknownSection,
                s,
                format!("Unknown or malformed problem section `{other}`."),
            ),
            None => {
                an.push(Category::Lexical, Code::MalformedStructure, s, "Expected a parenthesized problem section.")
            }
        }
    }

    let mut objects = BTreeMap::new();
    for items in objects_node {
        let Some(entries) = an.typed_list(items, Category::ObjectType, Section::Objects) else {
            continue;
        };
        for (obj, ty, node) in entries {
            if obj.starts_with('?') || parse_decimal(&obj).is_some() {
                an.push(
                    Category::ObjectType,
                    Code::MalformedStructure,
                    node,
                    format!("`{obj}` is not a valid object name."),
                );
            } else if objects.contains_key(&obj) {
                an.push(
                    Category::ObjectType,
                    Code::DuplicateDeclaration,
                    node,
                    format!("Object `{obj}` is declared more than once."),
                );
            } else if !an.type_known(&ty) {
                an.unknown_type(&ty, &format!("object `{obj}`"), Section::Objects, node);
            } else {
                objects.insert(obj.clone(), ty.clone());
                prob.objects.push(Typed::new(obj, ty));
            }
        }
    }

    let scope = Scope::Ground(&objects);
    for items in init_node {
        for entry in items {
            match entry.head() {
                Some("=") => {
                    let parts = entry.list().unwrap();
                    if parts.len() != 3 {
                        an.push(
                            Category::NumericUsage,
                            Code::ArityMismatch,
                            entry,
                            "A numeric initialization is written `(= (function args) value)`.",
                        );
                        continue;
                    }
                    if parts[1].head().is_none() {
                        an.push(
                            Category::NumericUsage,
                            Code::BadOperand,
                            &parts[1],
                            "The target of `=` in `Init` must be a function application.",
                        );
                        continue;
                    }
                    let Some(target) = an.fluent_ref(&parts[1], &scope, Section::Init) else {
                        continue;
                    };
                    let Some(value) = parts[2].symbol().and_then(parse_decimal) else {
                        an.push(
                            Category::NumericUsage,
                            Code::BadOperand,
                            &parts[2],
                            format!("The value assigned in `{}` must be a number.", entry.to_compact()),
                        );
                        continue;
                    };
                    let key = ground_of(&target.function, &target.args);
                    if prob.init_fluents.contains_key(&key) {
                        an.push(
                            Category::FunctionUsage,
                            Code::DuplicateInit,
                            entry,
                            format!(
                                "Duplicate init assignment: the fluent `{key}` is assigned more than once in `Init`."
                            ),
                        );
                        continue;
                    }
                    prob.init_fluents.insert(key, value);
                }
                Some("not") => an.push(
                    Category::PredicateFormat,
                    Code::MalformedStructure,
                    entry,
                    "Negative literals are not allowed in `Init`; omit false atoms instead.",
                ),
                Some(_) => {
                    if let Some(atom) = an.atom(entry, &scope, Section::Init) {
                        prob.init_atoms.insert(ground_of(&atom.predicate, &atom.args));
                    }
                }
                None => an.push(
                    Category::PredicateFormat,
                    Code::MalformedStructure,
                    entry,
                    format!("`{}` in `Init` is not a ground atom.", entry.to_compact()),
                ),
            }
        }
    }
    if let Some(g) = goal_node {
        if let Some(goal) = an.condition(g, &scope, Section::Goal) {
            prob.goal = goal;
        }
    }
    if an.diags.is_empty() {
        Ok(prob)
    } else {
        Err(an.diags)
    }
}

fn ground_of(name: &str, args: &[Term]) -> Ground {
    Ground { name: name.to_string(), args: args.iter().map(|t| t.as_str().to_string()).collect() }
}

/// Result of analyzing a single-action fragment.
pub(crate) struct FragmentParse {
    pub action: Action,
    pub new_fluents: Vec<(FluentKind, Signature)>,
}

/// Analyzes `(:predicates ...)`, `(:functions ...)` and one `(:action ...)`
/// form. A surrounding `(define (domain ...) ...)` wrapper is tolerated.
pub(crate) fn analyze_fragment(text: &str, mut an: Analyzer) -> Result<FragmentParse, Vec<Diagnostic>> {
    let (top, lex) = read_all(text);
    if !lex.is_empty() {
        return Err(lex);
    }
    let mut forms: Vec<&SExpr> = Vec::new();
    for t in &top {
        if t.head() == Some("define") {
            forms.extend(t.list().unwrap().iter().skip(2));
        } else {
            forms.push(t);
        }
    }
    let mut new_fluents = Vec::new();
    let mut action_nodes = Vec::new();
    for f in &forms {
        match section_items(f) {
            Some((":predicates", items)) => {
                for sig in an.predicates_section(items) {
                    new_fluents.push((FluentKind::Predicate, sig));
                }
            }
            Some((":action", _)) => action_nodes.push(*f),
            _ => {}
        }
    }
    for f in &forms {
        if let Some((":functions", items)) = section_items(f) {
            for sig in an.functions_section(items) {
                new_fluents.push((FluentKind::Function, sig));
            }
        }
    }
    for f in &forms {
        match section_items(f) {
            Some((":predicates" | ":functions" | ":action" | ":requirements" | ":types", _)) => {}
            _ => an.push(
                Category::Lexical,
                Code::UnknownSection,
                f,
                format!("Unexpected `{}`; expected an `(:action ...)` form.", f.to_compact()),
            ),
        }
    }
    let action = match action_nodes.as_slice() {
        [node] => an.action(node, &BTreeSet::new()),
        [] => {
            an.diags.push(Diagnostic::new(
                Category::Lexical,
                Code::MissingAction,
                Location::new(1, 1, text.chars().take(40).collect::<String>()),
                "No `(:action ...)` definition was found in the response.",
            ));
            None
        }
        [_, second, ..] => {
            an.push(
                Category::Lexical,
                Code::DuplicateDeclaration,
                second,
                "Exactly one action must be written per response.",
            );
            None
        }
    };
    match action {
        Some(action) if an.diags.is_empty() => Ok(FragmentParse { action, new_fluents }),
        _ => Err(an.diags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SURVEILLANCE: &str = r#"
(define (domain surveillance)
  (:requirements :strips :typing)
  (:types uav location)
  (:predicates (at ?u - uav ?l - location)
               (connected ?from - location ?to - location)
               (photo-taken ?l - location)
               (base ?l - location))
  (:action fly
    :parameters (?u - uav ?from - location ?to - location)
    :precondition (and (at ?u ?from) (connected ?from ?to))
    :effect (and (not (at ?u ?from)) (at ?u ?to)))
  (:action take-photo
    :parameters (?u - uav ?l - location)
    :precondition (at ?u ?l)
    :effect (photo-taken ?l))
  (:action return-to-base
    :parameters (?u - uav ?from - location ?b - location)
    :precondition (and (at ?u ?from) (base ?b) (connected ?from ?b))
    :effect (and (not (at ?u ?from)) (at ?u ?b))))
"#;

    fn errs(r: Result<Domain, Vec<Diagnostic>>) -> Vec<Diagnostic> {
        r.expect_err("expected diagnostics")
    }

    #[test]
    fn parses_surveillance_domain() {
        let d = parse_domain(SURVEILLANCE).unwrap();
        assert_eq!(d.name, "surveillance");
        assert_eq!(d.actions.len(), 3);
        let names: Vec<_> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["fly", "take-photo", "return-to-base"]);
        assert!(d.predicates.len() >= 2);
        assert_eq!(d.predicate("at").unwrap().arity(), 2);
    }

    #[test]
    fn empty_domain() {
        let d = parse_domain("(define (domain d) )").unwrap();
        assert!(d.actions.is_empty());
        assert!(d.predicates.is_empty());
    }

    #[test]
    fn mixed_case_normalizes() {
        let upper = SURVEILLANCE.replace("fly", "FLY").replace("(at ", "(At ").replace("?from", "?FROM");
        assert_eq!(parse_domain(&upper).unwrap(), parse_domain(SURVEILLANCE).unwrap());
    }

    #[test]
    fn erroneous_summation_is_numeric_usage() {
        let text = r#"(define (domain d) (:requirements :typing :fluents)
          (:types region uav)
          (:predicates (is-uav ?u - uav))
          (:functions (uav-number ?r - region) - number)
          (:action a :parameters (?r - region ?u - uav)
            :precondition (>= (+ (uav-number ?r) (is-uav ?u)) 1)
            :effect (increase (uav-number ?r) 1)))"#;
        let d = errs(parse_domain(text));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::NumericUsage);
        assert!(d[0].message.contains("is a predicate but should be a function"));
    }

    #[test]
    fn bare_summation_as_condition_is_numeric_usage() {
        let text = r#"(define (domain d) (:types region uav)
          (:predicates (is-uav ?u - uav))
          (:functions (uav-number ?r - region))
          (:action a :parameters (?r - region ?u - uav)
            :precondition (+ (uav-number ?r) (is-uav ?u))
            :effect ()))"#;
        let d = errs(parse_domain(text));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].category, Category::NumericUsage);
    }

    #[test]
    fn distinct_kinds_for_structural_errors() {
        let unbalanced = errs(parse_domain("(define (domain d)"));
        assert_eq!(unbalanced[0].code, Code::UnbalancedParens);
        let req = errs(parse_domain("(define (domain d) (:requirements :durative-actions))"));
        assert_eq!(req[0].code, Code::UnknownRequirement);
        let dup = errs(parse_domain("(define (domain d) (:types t) (:predicates (p ?x - t) (p ?x - t ?y - t)))"));
        assert_eq!(dup[0].code, Code::DuplicateDeclaration);
        assert_eq!(dup[0].category, Category::PredicateName);
        let lex = errs(parse_domain("(define (domain d) {)"));
        assert_eq!(lex[0].code, Code::UnexpectedCharacter);
        for diags in [&unbalanced, &req, &dup, &lex] {
            assert!(diags[0].location.line >= 1 && diags[0].location.column >= 1);
        }
    }

    #[test]
    fn identical_redeclaration_is_accepted() {
        let d = parse_domain("(define (domain d) (:types t) (:predicates (p ?x - t) (p ?y - t)))").unwrap();
        assert_eq!(d.predicates.len(), 1);
    }

    #[test]
    fn undeclared_predicate_and_arity() {
        let base = "(define (domain d) (:types t) (:predicates (p ?x - t))
            (:action a :parameters (?x - t) :precondition {PRE} :effect ()))";
        let d = errs(parse_domain(&base.replace("{PRE}", "(q ?x)")));
        assert_eq!((d[0].category, d[0].code), (Category::PredicateUsage, Code::UndeclaredFluent));
        let d = errs(parse_domain(&base.replace("{PRE}", "(p ?x ?x)")));
        assert_eq!((d[0].category, d[0].code), (Category::PredicateUsage, Code::ArityMismatch));
        let d = errs(parse_domain(&base.replace("{PRE}", "(p ?y)")));
        assert_eq!((d[0].category, d[0].code), (Category::PredicateUsage, Code::UnboundVariable));
        let d = errs(parse_domain(&base.replace("{PRE}", "(p (f ?x))")));
        assert_eq!(d[0].category, Category::PredicateFormat);
        let d = errs(parse_domain(&base.replace("{PRE}", "(increase (p ?x) 1)")));
        assert_eq!(d[0].category, Category::NumericUsage);
        let d = errs(parse_domain(&base.replace("{PRE}", "(or (p ?x) (p ?x))")));
        assert_eq!(d[0].code, Code::UnsupportedConstruct);
    }

    #[test]
    fn one_diagnostic_per_node() {
        let text = "(define (domain d) (:types t) (:predicates (p ?x - t))
            (:action a :parameters (?x - t) :precondition (and (q ?x) (r ?x)) :effect (s ?x)))";
        let d = errs(parse_domain(text));
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn argument_types_respect_hierarchy() {
        let base = "(define (domain d) (:types vehicle - object uav - vehicle place)
            (:predicates (at ?v - vehicle ?p - place))
            (:action a :parameters (?u - {T} ?p - place) :precondition (at ?u ?p) :effect ()))";
        assert!(parse_domain(&base.replace("{T}", "uav")).is_ok());
        let d = errs(parse_domain(&base.replace("{T}", "place")));
        assert_eq!(d[0].code, Code::ArgumentType);
    }

    #[test]
    fn numeric_effects_and_comparisons() {
        let text = "(define (domain d) (:requirements :typing :numeric-fluents) (:types u)
            (:functions (energy ?u - u) - number (total))
            (:action a :parameters (?u - u)
              :precondition (and (>= (energy ?u) 1) (< (- (energy ?u)) 0.5))
              :effect (and (decrease (energy ?u) 1) (increase (total) (* 2 (energy ?u))))))";
        let d = parse_domain(text).unwrap();
        let a = &d.actions[0];
        assert_eq!(a.precondition.conjuncts().len(), 2);
        assert_eq!(a.effect.literals().len(), 2);
    }

    #[test]
    fn comparison_in_effect_rejected() {
        let text = "(define (domain d) (:types u) (:functions (e ?u - u))
            (:action a :parameters (?u - u) :precondition () :effect (>= (e ?u) 1)))";
        let d = errs(parse_domain(text));
        assert_eq!(d[0].category, Category::NumericUsage);
    }

    #[test]
    fn parses_problem() {
        let dom = parse_domain(SURVEILLANCE).unwrap();
        let text = "(define (problem p1) (:domain surveillance)
            (:objects uav1 - uav base waypoint1 waypoint2 - location)
            (:init (at uav1 base) (connected base waypoint1) (base base))
            (:goal (and (photo-taken waypoint1) (photo-taken waypoint2))))";
        let p = parse_problem(text, &dom).unwrap();
        assert_eq!(p.objects.len(), 4);
        assert_eq!(p.goal.conjuncts().len(), 2);
        assert!(p.init_atoms.contains(&Ground::new("at", &["uav1", "base"])));
    }

    #[test]
    fn problem_errors() {
        let dom = parse_domain(SURVEILLANCE).unwrap();
        let bad_type = "(define (problem p) (:domain surveillance) (:objects r - robot) (:init) (:goal (and)))";
        let d = parse_problem(bad_type, &dom).unwrap_err();
        assert_eq!(d[0].category, Category::ObjectType);
        let bad_goal = "(define (problem p) (:domain surveillance) (:objects l - location) (:init) (:goal (seen l)))";
        let d = parse_problem(bad_goal, &dom).unwrap_err();
        assert_eq!(d[0].code, Code::UndeclaredFluent);
        let bad_arity =
            "(define (problem p) (:domain surveillance) (:objects l - location) (:init (photo-taken l l)) (:goal (and)))";
        let d = parse_problem(bad_arity, &dom).unwrap_err();
        assert_eq!(d[0].code, Code::ArityMismatch);
    }

    #[test]
    fn duplicate_init_assignment() {
        let dom = parse_domain(
            "(define (domain d) (:requirements :typing :fluents) (:types uav) (:functions (energy ?u - uav) - number))",
        )
        .unwrap();
        let text = "(define (problem p) (:domain d) (:objects u1 - uav)
            (:init (= (energy u1) 5) (= (energy u1) 7)) (:goal (and)))";
        let d = parse_problem(text, &dom).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, Code::DuplicateInit);
        assert!(d[0].message.contains("Duplicate init assignment"));
    }

    #[test]
    fn vacuous_goal() {
        let dom = parse_domain(SURVEILLANCE).unwrap();
        let p = parse_problem("(define (problem p) (:domain surveillance) (:init) (:goal (and)))", &dom).unwrap();
        assert_eq!(p.goal, Condition::And(vec![]));
    }
}
