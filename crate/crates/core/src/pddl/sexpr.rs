//! Tokenizer and s-expression reader. Symbols are lowercased and `;`
//! comments are dropped here.

use crate::diagnostics::{Category, Code, Diagnostic, Location};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Symbol { text: String, pos: Pos },
    List { items: Vec<SExpr>, pos: Pos, end: usize },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Symbol { .. } => None,
        }
    }

    /// Head symbol of a list, if the list starts with one.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|items| items.first()).and_then(SExpr::symbol)
    }

    /// Compact single-line rendering used for diagnostic snippets.
    pub fn to_compact(&self) -> String {
        match self {
            SExpr::Symbol { text, .. } => text.clone(),
            SExpr::List { items, .. } => {
                let inner: Vec<String> = items.iter().map(SExpr::to_compact).collect();
                format!("({})", inner.join(" "))
            }
        }
    }

    pub fn location(&self) -> Location {
        let p = self.pos();
        Location::new(p.line, p.col, self.to_compact())
    }
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '?' | ':' | '.' | '+' | '*' | '/' | '<' | '>' | '=' | '!')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Symbol(String),
}

fn tokenize(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<(Tok, Pos)> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.char_indices().peekable();
    while let Some((offset, c)) = chars.next() {
        let pos = Pos { line, col, offset };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {}
            ';' => {
                while let Some(&(_, n)) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
                continue;
            }
            '(' => out.push((Tok::Open, pos)),
            ')' => out.push((Tok::Close, pos)),
            c if is_symbol_char(c) => {
                let mut sym = String::new();
                sym.extend(c.to_lowercase());
                while let Some(&(_, n)) = chars.peek() {
                    if !is_symbol_char(n) {
                        break;
                    }
                    sym.extend(n.to_lowercase());
                    chars.next();
                    col += 1;
                }
                out.push((Tok::Symbol(sym), pos));
            }
            other => {
                // skip the rest of the offending token so one bad word yields one diagnostic
                while let Some(&(_, n)) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
                diags.push(Diagnostic::new(
                    Category::Lexical,
                    Code::UnexpectedCharacter,
                    Location::new(pos.line, pos.col, other.to_string()),
                    format!("Unexpected character `{other}` at line {}, column {}.", pos.line, pos.col),
                ));
            }
        }
        col += 1;
    }
    out
}

/// Reads every top-level expression in `text`. Returns the expressions read
/// plus any lexical diagnostics (bad characters, unbalanced parentheses).
pub fn read_all(text: &str) -> (Vec<SExpr>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let tokens = tokenize(text, &mut diags);
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Tok::Open => stack.push((Vec::new(), pos)),
            Tok::Close => match stack.pop() {
                Some((items, open)) => {
                    let e = SExpr::List { items, pos: open, end: pos.offset + 1 };
                    match stack.last_mut() {
                        Some((parent, _)) => parent.push(e),
                        None => top.push(e),
                    }
                }
                None => diags.push(Diagnostic::new(
                    Category::Lexical,
                    Code::UnbalancedParens,
                    Location::new(pos.line, pos.col, ")"),
                    format!("Unbalanced parentheses: unexpected `)` at line {}, column {}.", pos.line, pos.col),
                )),
            },
            Tok::Symbol(s) => {
                let e = SExpr::Symbol { text: s, pos };
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => top.push(e),
                }
            }
        }
    }
    if let Some((_, open)) = stack.first() {
        let snippet: String = text[open.offset..].chars().take(40).collect();
        diags.push(Diagnostic::new(
            Category::Lexical,
            Code::UnbalancedParens,
            Location::new(open.line, open.col, snippet),
            format!(
                "Unbalanced parentheses: {} `(` opened at line {}, column {} never closed.",
                stack.len(),
                open.line,
                open.col
            ),
        ));
    }
    (top, diags)
}

/// Balanced top-level parenthesized spans of `text`, as byte ranges. Used to
/// pull PDDL out of free-form model completions.
pub fn balanced_spans(text: &str) -> Vec<std::ops::Range<usize>> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_comment = false;
    for (i, c) in text.char_indices() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        match c {
            ';' => in_comment = true,
            '(' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(start..i + 1);
                }
            }
            _ => {}
        }
    }
    spans
}
