//! Typed syntax diagnostics and the corrective feedback text fed back to a
//! language model.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Error taxonomy. The first eight are the fluent/type categories tallied in
/// evaluation reports; `Lexical` covers tokens and document structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    ObjectType,
    PredicateName,
    PredicateFormat,
    PredicateUsage,
    FunctionName,
    FunctionFormat,
    FunctionUsage,
    NumericUsage,
    Lexical,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::ObjectType,
        Category::PredicateName,
        Category::PredicateFormat,
        Category::PredicateUsage,
        Category::FunctionName,
        Category::FunctionFormat,
        Category::FunctionUsage,
        Category::NumericUsage,
        Category::Lexical,
    ];

    /// The eight categories of the fluent/type taxonomy, in table order.
    pub const TAXONOMY: [Category; 8] = [
        Category::ObjectType,
        Category::PredicateName,
        Category::PredicateFormat,
        Category::PredicateUsage,
        Category::FunctionName,
        Category::FunctionFormat,
        Category::FunctionUsage,
        Category::NumericUsage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ObjectType => "object-type",
            Category::PredicateName => "predicate-name",
            Category::PredicateFormat => "predicate-format",
            Category::PredicateUsage => "predicate-usage",
            Category::FunctionName => "function-name",
            Category::FunctionFormat => "function-format",
            Category::FunctionUsage => "function-usage",
            Category::NumericUsage => "numeric-usage",
            Category::Lexical => "lexical",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::ObjectType => "object type",
            Category::PredicateName => "predicate names",
            Category::PredicateFormat => "predicate format",
            Category::PredicateUsage => "predicate usage",
            Category::FunctionName => "function names",
            Category::FunctionFormat => "function format",
            Category::FunctionUsage => "function usage",
            Category::NumericUsage => "numeric usage",
            Category::Lexical => "lexical",
        }
    }

    pub fn from_name(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Default guidance appended to every feedback paragraph of this category.
    pub fn guidance(self) -> &'static str {
        match self {
            Category::ObjectType => {
                "Note that parameter and object types must be chosen from the declared types."
            }
            Category::PredicateName => {
                "Note that predicate names must not coincide with object types, existing predicate or function names, or PDDL keywords."
            }
            Category::FunctionName => {
                "Note that function names must not coincide with object types, existing predicate or function names, or PDDL keywords."
            }
            Category::PredicateFormat => {
                "Note that a predicate is written as (name ?arg1 ?arg2 ...) with one variable or object per argument."
            }
            Category::FunctionFormat => {
                "Note that a function is written as (name ?arg1 ?arg2 ...) and declared with the return type number."
            }
            Category::PredicateUsage => {
                "Note that you can always create new predicates, but you should also reuse existing predicates whenever possible."
            }
            Category::FunctionUsage => {
                "Note that you can always create new functions, but you should also reuse existing functions whenever possible."
            }
            Category::NumericUsage => {
                "Note that numeric operators only take functions or numbers as operands, and numeric effects only change functions."
            }
            Category::Lexical => "Note that the output must be a single well-formed PDDL expression.",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Finer-grained kind, distinguishing e.g. unbalanced parentheses from an
/// unknown requirement flag within the lexical category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    UnexpectedCharacter,
    UnbalancedParens,
    UnknownRequirement,
    UnknownSection,
    MalformedStructure,
    UnsupportedConstruct,
    DuplicateDeclaration,
    NameConflict,
    ReservedKeyword,
    UndeclaredType,
    TypeNotInExtern,
    UndeclaredFluent,
    WrongKind,
    ArityMismatch,
    ArgumentType,
    UnboundVariable,
    UnknownObject,
    SignatureMismatch,
    DuplicateInit,
    BadOperand,
    MisplacedOperator,
    MissingAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
    pub snippet: String,
}

impl Location {
    pub fn new(line: usize, column: usize, snippet: impl Into<String>) -> Self {
        let mut snippet: String = snippet.into();
        if snippet.chars().count() > 80 {
            snippet = snippet.chars().take(77).collect::<String>() + "...";
        }
        Location { line, column, snippet }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub category: Category,
    pub code: Code,
    pub location: Location,
    pub message: String,
    pub suggestion: String,
}

impl Diagnostic {
    pub fn new(category: Category, code: Code, location: Location, message: impl Into<String>) -> Self {
        Diagnostic { category, code, location, message: message.into(), suggestion: category.guidance().to_string() }
    }

    pub fn with_suggestion(mut self, suggestion: impl Into<String>) -> Self {
        self.suggestion = suggestion.into();
        self
    }

    /// One feedback paragraph, phrased as a reply asking for a revision.
    pub fn feedback(&self) -> String {
        let mut out = format!("{} Please revise to fix this error.", self.message.trim_end());
        if !self.suggestion.is_empty() {
            out.push(' ');
            out.push_str(&self.suggestion);
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: [{}] {}", self.location.line, self.location.column, self.category, self.message)
    }
}

/// Machine-readable line record for a diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub category: Category,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<&Diagnostic> for DiagnosticRecord {
    fn from(d: &Diagnostic) -> Self {
        DiagnosticRecord {
            category: d.category,
            line: d.location.line,
            column: d.location.column,
            message: d.message.clone(),
        }
    }
}

/// Feedback text for a list of diagnostics: one paragraph each, input order,
/// separated by blank lines. Empty input gives empty text.
pub fn render_feedback(diags: &[Diagnostic]) -> String {
    diags.iter().map(Diagnostic::feedback).collect::<Vec<_>>().join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(category: Category, msg: &str) -> Diagnostic {
        Diagnostic::new(category, Code::WrongKind, Location::new(1, 1, "x"), msg)
    }

    #[test]
    fn empty_feedback_is_empty() {
        assert_eq!(render_feedback(&[]), "");
    }

    #[test]
    fn feedback_keeps_input_order() {
        let a = diag(Category::PredicateUsage, "first");
        let b = diag(Category::ObjectType, "second");
        let text = render_feedback(&[a, b]);
        let paras: Vec<_> = text.split("\n\n").collect();
        assert_eq!(paras.len(), 2);
        assert!(paras[0].starts_with("first"));
        assert!(paras[1].starts_with("second"));
    }

    #[test]
    fn taxonomy_categories_have_guidance() {
        for c in Category::TAXONOMY {
            assert!(!c.guidance().is_empty());
            assert_eq!(Category::from_name(c.as_str()), Some(c));
        }
    }

    #[test]
    fn snippet_is_truncated() {
        let loc = Location::new(1, 1, "x".repeat(200));
        assert_eq!(loc.snippet.chars().count(), 80);
    }
}
