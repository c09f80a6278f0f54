//! Syntax checking of whole domains and single-action fragments against an
//! externally fixed type list and a growing fluent registry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Category, Code, Diagnostic, Location};
use crate::pddl::parser::{analyze_domain, analyze_fragment, Analyzer};
use crate::pddl::sexpr::{read_all, SExpr};
use crate::pddl::{render_domain, Action, Domain, FluentKind, Requirement, Signature, TypeDecl};

/// Object types and requirement flags fixed before generation starts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extern {
    pub types: Vec<TypeDecl>,
    pub requirements: BTreeSet<Requirement>,
}

impl Extern {
    pub fn new(types: Vec<TypeDecl>, requirements: BTreeSet<Requirement>) -> Self {
        Extern { types, requirements }
    }

    pub fn from_domain(dom: &Domain) -> Self {
        Extern { types: dom.types.clone(), requirements: dom.requirements.clone() }
    }

    /// Reads `(:requirements ...)` and `(:types ...)` forms, optionally
    /// wrapped in a `(define ...)`. Other forms are ignored.
    pub fn parse(text: &str) -> Result<Extern, Vec<Diagnostic>> {
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
        let mut an = Analyzer::new();
        let mut ext = Extern::default();
        for f in forms {
            let Some(items) = f.list() else { continue };
            match f.head() {
                Some(":requirements") => an.requirements_section(&items[1..]),
                Some(":types") => ext.types.extend(an.types_section(&items[1..])),
                _ => {}
            }
        }
        if !an.diags.is_empty() {
            return Err(an.diags);
        }
        ext.requirements = an.requirements.clone();
        Ok(ext)
    }

    pub fn type_names(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub kind: FluentKind,
    pub decl: Signature,
    /// Action whose generation introduced the fluent; `None` when seeded.
    pub introduced_by: Option<String>,
}

/// Fluents declared so far in a generation session, in introduction order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluentRegistry {
    entries: Vec<RegistryEntry>,
}

impl FluentRegistry {
    pub fn new() -> Self {
        FluentRegistry::default()
    }

    pub fn from_domain(dom: &Domain) -> Self {
        let mut reg = FluentRegistry::new();
        for p in &dom.predicates {
            reg.insert(FluentKind::Predicate, p.clone(), None);
        }
        for f in &dom.functions {
            reg.insert(FluentKind::Function, f.clone(), None);
        }
        reg
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.decl.name == name)
    }

    pub fn predicates(&self) -> Vec<Signature> {
        self.of_kind(FluentKind::Predicate)
    }

    pub fn functions(&self) -> Vec<Signature> {
        self.of_kind(FluentKind::Function)
    }

    fn of_kind(&self, kind: FluentKind) -> Vec<Signature> {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.decl.clone()).collect()
    }

    /// Adds a declaration unless its name is already present. Returns whether
    /// it was added.
    pub fn insert(&mut self, kind: FluentKind, decl: Signature, introduced_by: Option<&str>) -> bool {
        if self.get(&decl.name).is_some() {
            return false;
        }
        self.entries.push(RegistryEntry { kind, decl, introduced_by: introduced_by.map(str::to_string) });
        true
    }

    /// Merges fluents accepted with `action`.
    pub fn merge(&mut self, action: &str, fluents: &[(FluentKind, Signature)]) {
        for (kind, decl) in fluents {
            self.insert(*kind, decl.clone(), Some(action));
        }
    }
}

/// Checks a parsed domain against `ext`: every used type must come from the
/// Extern and fluent names must avoid PDDL keywords. Empty means accepted.
pub fn check_domain(dom: &Domain, ext: &Extern) -> Vec<Diagnostic> {
    let text = render_domain(dom);
    match analyze_domain(&text, Analyzer::new().strict(&ext.types)) {
        Ok(_) => Vec::new(),
        Err(diags) => diags,
    }
}

/// Parses and checks domain text in one step, as the `check` command does.
pub fn check_domain_text(text: &str, ext: Option<&Extern>) -> Result<Domain, Vec<Diagnostic>> {
    let dom = crate::pddl::parse_domain(text)?;
    match ext {
        Some(ext) => {
            let diags = analyze_domain(text, Analyzer::new().strict(&ext.types)).err().unwrap_or_default();
            if diags.is_empty() {
                Ok(dom)
            } else {
                Err(diags)
            }
        }
        None => Ok(dom),
    }
}

/// An accepted action together with the fluents it introduced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedAction {
    pub action: Action,
    pub new_fluents: Vec<(FluentKind, Signature)>,
}

/// Checks one generated action (with optional fluent declarations) against
/// the registry built so far.
pub fn check_action_fragment(
    fragment: &str,
    registry: &FluentRegistry,
    ext: &Extern,
) -> Result<CheckedAction, Vec<Diagnostic>> {
    let an = Analyzer::new().strict(&ext.types).with_registry(registry.entries().iter().map(|e| (e.kind, &e.decl)));
    let parsed = analyze_fragment(fragment, an)?;
    Ok(CheckedAction { action: parsed.action, new_fluents: parsed.new_fluents })
}

/// Diagnostic for a completion that contained no PDDL at all.
pub fn missing_action_diagnostic(completion: &str) -> Diagnostic {
    Diagnostic::new(
        Category::Lexical,
        Code::MissingAction,
        Location::new(1, 1, completion.chars().take(40).collect::<String>()),
        "No `(:action ...)` definition was found in the response.",
    )
}
