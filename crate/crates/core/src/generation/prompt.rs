use std::fmt::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::checker::{Extern, FluentRegistry};
use crate::pddl::parser::{analyze_fragment, Analyzer};
use crate::pddl::render::{render_condition, render_declarations, render_effect};
use crate::pddl::sexpr::balanced_spans;
use crate::pddl::{Action, TypeDecl, ROOT_TYPE};

pub const Q_OBJECTS: &str = "What are the objects?";
pub const Q_PRECONDITIONS: &str =
    "For each object, what are the preconditions? State them using predicates or functions.";
pub const Q_EFFECTS: &str = "For each object, what are the effects? State them using predicates or functions.";
pub const WRITE_ACTION: &str = "Write the action in the following format";
pub const NO_FLUENTS: &str = "No fluents defined yet.";
pub const TARGET_HEADER: &str = "## Target action";
pub const DESCRIPTION_LABEL: &str = "Action description:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodPreset {
    /// Two fixed format examples, no reasoning questions.
    Format,
    /// Two fixed format examples with reasoning questions.
    Fcot,
    /// One fixed format example plus one retrieved example, no reasoning.
    Fs,
    /// One fixed format example plus one retrieved example, both with reasoning.
    Ours,
}

impl MethodPreset {
    pub const ALL: [MethodPreset; 4] = [MethodPreset::Format, MethodPreset::Fcot, MethodPreset::Fs, MethodPreset::Ours];

    pub fn uses_cot(self) -> bool {
        matches!(self, MethodPreset::Fcot | MethodPreset::Ours)
    }

    pub fn uses_retrieval(self) -> bool {
        matches!(self, MethodPreset::Fs | MethodPreset::Ours)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodPreset::Format => "format",
            MethodPreset::Fcot => "fcot",
            MethodPreset::Fs => "fs",
            MethodPreset::Ours => "ours",
        }
    }

    pub fn parse(s: &str) -> Option<MethodPreset> {
        MethodPreset::ALL.into_iter().find(|p| p.as_str() == s.to_lowercase())
    }
}

/// Answers to the three reasoning questions, derived from an example's PDDL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotAnswer {
    pub objects: String,
    pub preconditions: String,
    pub effects: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub label: String,
    pub description: String,
    /// Fluent declarations followed by the action, as the model should write it.
    pub pddl: String,
    pub cot: CotAnswer,
}

fn mentions(text: &str, var: &str) -> bool {
    text.split(|c: char| c.is_whitespace() || c == '(' || c == ')').any(|t| t == var)
}

fn per_object(action: &Action, items: &[String]) -> String {
    let mut out = String::new();
    let mut used = vec![false; items.len()];
    for p in &action.params {
        let mine: Vec<&str> = items
            .iter()
            .enumerate()
            .filter(|(_, t)| mentions(t, &p.name))
            .map(|(i, t)| {
                used[i] = true;
                t.as_str()
            })
            .collect();
        let listed = if mine.is_empty() { "none".to_string() } else { mine.join(", ") };
        let _ = writeln!(out, "{} ({}): {listed}", p.name, p.ty);
    }
    let rest: Vec<&str> = items.iter().zip(&used).filter(|(_, u)| !**u).map(|(t, _)| t.as_str()).collect();
    if !rest.is_empty() {
        let _ = writeln!(out, "no specific object: {}", rest.join(", "));
    }
    out.trim_end().to_string()
}

impl CotAnswer {
    pub fn from_action(action: &Action) -> Self {
        let objects = if action.params.is_empty() {
            "The action has no parameters.".to_string()
        } else {
            action.params.iter().map(|p| format!("{} - {}", p.name, p.ty)).collect::<Vec<_>>().join(", ")
        };
        let pre: Vec<String> = action.precondition.conjuncts().into_iter().map(render_condition).collect();
        let eff: Vec<String> = action.effect.literals().into_iter().map(render_effect).collect();
        CotAnswer { objects, preconditions: per_object(action, &pre), effects: per_object(action, &eff) }
    }
}

impl Example {
    /// Builds an example from fragment text (declarations plus one action).
    /// Types are taken from the parameters, so any fragment is accepted as
    /// long as it is well formed.
    pub fn from_fragment(label: &str, description: &str, pddl: &str) -> Result<Example, String> {
        let action = parse_example_action(pddl)?;
        Ok(Example {
            label: label.to_string(),
            description: description.trim().to_string(),
            pddl: pddl.trim().to_string(),
            cot: CotAnswer::from_action(&action),
        })
    }
}

/// Parses an example fragment without a fixed type list by collecting the
/// types used in it first.
fn parse_example_action(pddl: &str) -> Result<Action, String> {
    let (top, lex) = crate::pddl::sexpr::read_all(pddl);
    if let Some(d) = lex.first() {
        return Err(d.to_string());
    }
    let mut types = std::collections::BTreeSet::new();
    fn collect(e: &crate::pddl::sexpr::SExpr, types: &mut std::collections::BTreeSet<String>) {
        if let Some(items) = e.list() {
            for w in items.windows(2) {
                if w[0].symbol() == Some("-") {
                    if let Some(t) = w[1].symbol() {
                        if t != ROOT_TYPE && t != "number" {
                            types.insert(t.to_string());
                        }
                    }
                }
            }
            items.iter().for_each(|i| collect(i, types));
        }
    }
    top.iter().for_each(|e| collect(e, &mut types));
    let decls: Vec<TypeDecl> = types.iter().map(|t| TypeDecl::new(t.as_str(), None)).collect();
    analyze_fragment(pddl, Analyzer::new().strict(&decls))
        .map(|f| f.action)
        .map_err(|d| d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
}

#[derive(Deserialize)]
struct ExampleFile {
    example: Vec<RawExample>,
}

#[derive(Deserialize)]
struct RawExample {
    description: String,
    pddl: String,
}

/// The two bundled generic format examples.
pub fn format_examples() -> &'static [Example] {
    static EXAMPLES: OnceLock<Vec<Example>> = OnceLock::new();
    EXAMPLES.get_or_init(|| {
        let file: ExampleFile =
            toml::from_str(include_str!("../../assets/format_examples.toml")).expect("bundled examples parse");
        file.example
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Example::from_fragment(&format!("format example {}", i + 1), &e.description, &e.pddl)
                    .expect("bundled example is valid PDDL")
            })
            .collect()
    })
}

/// One generation prompt split into the system and user parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

const SYSTEM: &str = "You are an expert in PDDL. You write one action of a planning domain at a time, \
using numeric fluents where quantities are involved.";

fn extern_section(ext: &Extern) -> String {
    let mut s = String::new();
    let types: Vec<String> =
        ext.types.iter().map(|t| format!("{} - {}", t.name, t.parent.as_deref().unwrap_or(ROOT_TYPE))).collect();
    let _ = writeln!(s, "Types: {}", if types.is_empty() { "object".to_string() } else { types.join(", ") });
    if !ext.requirements.is_empty() {
        let flags: Vec<String> = ext.requirements.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "Requirements: {}", flags.join(" "));
    }
    s
}

pub fn registry_listing(registry: &FluentRegistry) -> String {
    if registry.is_empty() {
        return format!("{NO_FLUENTS}\n");
    }
    render_declarations(&registry.predicates(), &registry.functions())
}

fn write_example(s: &mut String, ex: &Example, cot: bool) {
    let _ = writeln!(s, "### {}", capitalize(&ex.label));
    let _ = writeln!(s, "{DESCRIPTION_LABEL}\n{}\n", ex.description);
    if cot {
        let _ = writeln!(s, "{Q_OBJECTS}\n{}\n", ex.cot.objects);
        let _ = writeln!(s, "{Q_PRECONDITIONS}\n{}\n", ex.cot.preconditions);
        let _ = writeln!(s, "{Q_EFFECTS}\n{}\n", ex.cot.effects);
        let _ = writeln!(s, "{WRITE_ACTION}:");
    }
    let _ = writeln!(s, "```pddl\n{}\n```\n", ex.pddl);
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Assembles the prompt: domain description, Extern, current fluents,
/// examples, then the target action description.
pub fn build_prompt(
    domain_description: &str,
    action_description: &str,
    ext: &Extern,
    registry: &FluentRegistry,
    examples: &[Example],
    preset: MethodPreset,
) -> Prompt {
    let cot = preset.uses_cot();
    let mut s = String::new();
    let _ = writeln!(s, "## Domain description\n{}\n", domain_description.trim());
    let _ = writeln!(s, "## Object types and requirements\n{}", extern_section(ext));
    let _ = writeln!(s, "## Fluents defined so far\n{}", registry_listing(registry));
    let _ = writeln!(s, "## Examples\n");
    for ex in examples {
        write_example(&mut s, ex, cot);
    }
    let _ = writeln!(s, "{TARGET_HEADER}\n{DESCRIPTION_LABEL}\n{}\n", action_description.trim());
    if cot {
        let _ = writeln!(
            s,
            "Answer the three questions for the target action as in the examples, then write the action in a ```pddl block."
        );
    } else {
        let _ = writeln!(s, "Write the action in the same format as the examples, in a ```pddl block.");
    }
    let _ = write!(
        s,
        "Use only the listed object types. Reuse the fluents defined so far whenever they fit, and declare any new \
predicates or functions in (:predicates ...) or (:functions ...) blocks before the action."
    );
    Prompt { system: SYSTEM.to_string(), user: s }
}

const FRAGMENT_HEADS: &[&str] = &["(:predicates", "(:functions", "(:action", "(define"];

fn starts_with_head(span: &str) -> bool {
    let compact: String = span.chars().filter(|c| !c.is_whitespace()).take(14).collect::<String>().to_lowercase();
    FRAGMENT_HEADS.iter().any(|h| compact.starts_with(&h.replace(' ', "")))
}

/// Pulls the PDDL fragment out of a completion: the last fenced block that
/// contains an action, else the declaration and action s-expressions found
/// in the text.
pub fn extract_fragment(completion: &str) -> Option<String> {
    let mut fenced = Vec::new();
    let mut rest = completion;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let Some(close) = body.find("```") else { break };
        fenced.push(body[..close].to_string());
        rest = &body[close + 3..];
    }
    if let Some(block) = fenced.iter().rev().find(|b| b.to_lowercase().contains("(:action")) {
        return Some(block.trim().to_string());
    }
    let spans: Vec<&str> =
        balanced_spans(completion).into_iter().map(|r| &completion[r]).filter(|s| starts_with_head(s)).collect();
    if spans.is_empty() {
        return fenced.into_iter().next().map(|b| b.trim().to_string()).filter(|b| !b.is_empty());
    }
    Some(spans.join("\n"))
}

/// Fragment text for an accepted action: declarations of every fluent it
/// references, then the action.
pub fn action_fragment(action: &Action, registry: &FluentRegistry) -> String {
    let used = action.fluent_names();
    let preds: Vec<_> = registry.predicates().into_iter().filter(|p| used.contains(p.name.as_str())).collect();
    let funcs: Vec<_> = registry.functions().into_iter().filter(|f| used.contains(f.name.as_str())).collect();
    format!("{}{}", render_declarations(&preds, &funcs), crate::pddl::render_action(action))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{FluentKind, Signature, Typed};

    #[test]
    fn bundled_examples_load() {
        let ex = format_examples();
        assert_eq!(ex.len(), 2);
        assert!(ex[0].cot.objects.contains("?b - block"));
        assert!(ex[1].cot.preconditions.contains("(truck-at ?t ?d)"));
    }

    fn ext() -> Extern {
        Extern::new(vec![TypeDecl::new("uav", None), TypeDecl::new("location", None)], Default::default())
    }

    #[test]
    fn format_preset_has_no_cot() {
        let p = build_prompt("d", "fly", &ext(), &FluentRegistry::new(), format_examples(), MethodPreset::Format);
        for q in [Q_OBJECTS, Q_PRECONDITIONS, Q_EFFECTS, WRITE_ACTION] {
            assert!(!p.user.contains(q), "{q}");
        }
        assert_eq!(p.user.matches("### ").count(), 2);
        assert!(p.user.contains(NO_FLUENTS));
    }

    #[test]
    fn cot_preset_lists_registry() {
        let mut reg = FluentRegistry::new();
        let sig = |n: &str| Signature::new(n, vec![Typed::new("?l", "location")]);
        reg.insert(FluentKind::Predicate, sig("visited"), None);
        reg.insert(FluentKind::Predicate, sig("safe"), None);
        reg.insert(FluentKind::Function, sig("cost"), None);
        let p = build_prompt("d", "fly", &ext(), &reg, format_examples(), MethodPreset::Ours);
        for q in [Q_OBJECTS, Q_PRECONDITIONS, Q_EFFECTS, WRITE_ACTION] {
            assert!(p.user.contains(q));
        }
        for d in ["(visited ?l - location)", "(safe ?l - location)", "(cost ?l - location) - number"] {
            assert!(p.user.contains(d));
        }
        assert!(!p.user.contains(NO_FLUENTS));
    }

    #[test]
    fn extraction_prefers_fenced_block() {
        let text = "Objects: (at ?u ?l)\n```pddl\n(:action fly :parameters ())\n```";
        assert_eq!(extract_fragment(text).unwrap(), "(:action fly :parameters ())");
        let bare = "Sure. (:predicates (p)) and then (:action a :parameters () :effect (p)) done (x)";
        assert_eq!(extract_fragment(bare).unwrap(), "(:predicates (p))\n(:action a :parameters () :effect (p))");
        assert_eq!(extract_fragment("no pddl here"), None);
    }
}
