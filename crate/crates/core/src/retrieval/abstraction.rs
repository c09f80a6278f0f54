use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::llm::{CompletionParams, LlmBackend, Message};
use crate::pddl::Domain;

/// Verbs seen so far, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbLexicon {
    verbs: Vec<String>,
}

impl VerbLexicon {
    pub fn new<S: AsRef<str>>(verbs: impl IntoIterator<Item = S>) -> Self {
        let mut lex = VerbLexicon::default();
        for v in verbs {
            lex.canonicalize(v.as_ref());
        }
        lex
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    /// Returns the canonical form of `verb`, appending it when novel.
    /// Matching is exact after lowercasing.
    pub fn canonicalize(&mut self, verb: &str) -> String {
        let v = verb.to_lowercase();
        if !self.verbs.contains(&v) {
            self.verbs.push(v.clone());
        }
        v
    }
}

pub trait AbstractionBackend: Send + Sync {
    /// Abstracted text plus the verbs it keeps.
    fn abstract_text(&self, desc: &str, lex: &VerbLexicon) -> Result<(String, Vec<String>), String>;
}

const LOCATION_WORDS: &[&str] = &[
    "position", "location", "loc", "waypoint", "wp", "region", "place", "base", "area", "cell", "point", "zone",
    "room", "site", "node",
];

const NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "twenty", "hundred", "half", "once", "twice",
];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "at", "in", "on", "to", "of", "is", "are", "be", "by", "it", "its", "if", "and", "or", "for",
    "from", "with", "this", "that", "new", "current",
];

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[[a-z]+\d+\]|[A-Za-z][A-Za-z0-9_\-]*[A-Za-z0-9]|[A-Za-z]|\d+(?:\.\d+)?").unwrap())
}

fn instance_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([a-z]+)[_\-]?(\d+)$").unwrap())
}

fn placeholder_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(object|state|value|position)(\d+)\]").unwrap())
}

/// Distinct placeholders in `text`, counted per kind.
pub fn placeholder_kinds(text: &str) -> BTreeMap<String, usize> {
    let distinct: BTreeSet<(String, String)> =
        placeholder_pattern().captures_iter(text).map(|c| (c[1].to_string(), c[2].to_string())).collect();
    let mut kinds = BTreeMap::new();
    for (kind, _) in distinct {
        *kinds.entry(kind).or_insert(0) += 1;
    }
    kinds
}

/// Deterministic rule-based abstraction. `state_words` (e.g. predicate
/// names) become `[stateN]` and `value_words` (function names) become
/// `[valueN]`. A number that counts a kind of object, as in "two positions",
/// is kept; `kind_words` extend the built-in location nouns for that check.
#[derive(Debug, Clone, Default)]
pub struct RuleAbstractor {
    pub state_words: BTreeSet<String>,
    pub value_words: BTreeSet<String>,
    pub kind_words: BTreeSet<String>,
}

fn lowercase_set<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> BTreeSet<String> {
    words.into_iter().map(|s| s.as_ref().to_lowercase()).collect()
}

impl RuleAbstractor {
    pub fn new<S: AsRef<str>>(state_words: impl IntoIterator<Item = S>) -> Self {
        RuleAbstractor { state_words: lowercase_set(state_words), ..Default::default() }
    }

    pub fn with_value_words<S: AsRef<str>>(mut self, words: impl IntoIterator<Item = S>) -> Self {
        self.value_words = lowercase_set(words);
        self
    }

    pub fn with_kind_words<S: AsRef<str>>(mut self, words: impl IntoIterator<Item = S>) -> Self {
        self.kind_words = lowercase_set(words);
        self
    }

    /// Predicates as state words, functions as value words, types as kinds.
    pub fn for_domain(dom: &Domain) -> Self {
        RuleAbstractor::new(dom.predicates.iter().map(|p| &p.name))
            .with_value_words(dom.functions.iter().map(|f| &f.name))
            .with_kind_words(dom.types.iter().map(|t| &t.name))
    }

    fn is_kind_noun(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        let singular = lower.strip_suffix('s').unwrap_or(&lower);
        [lower.as_str(), singular].iter().any(|w| LOCATION_WORDS.contains(w) || self.kind_words.contains(*w))
    }

    fn classify(&self, token: &str, sentence_start: bool, next: Option<&str>) -> Option<&'static str> {
        let lower = token.to_lowercase();
        if let Some(c) = instance_pattern().captures(&lower) {
            let base = &c[1];
            return Some(if LOCATION_WORDS.contains(&base) { "position" } else { "object" });
        }
        if lower.chars().next().is_some_and(|c| c.is_ascii_digit()) || NUMBER_WORDS.contains(&lower.as_str()) {
            if next.is_some_and(|n| self.is_kind_noun(n)) {
                return None;
            }
            return Some("value");
        }
        if STOPWORDS.contains(&lower.as_str()) {
            return None;
        }
        if self.value_words.contains(&lower) {
            return Some("value");
        }
        if self.state_words.contains(&lower) {
            return Some("state");
        }
        if !sentence_start && token.chars().next().is_some_and(char::is_uppercase) && token != "I" {
            return Some("object");
        }
        None
    }

    pub fn run(&self, desc: &str, lex: &mut VerbLexicon) -> String {
        let text = dedupe_sentences(desc);
        let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
        for c in placeholder_pattern().captures_iter(&text) {
            let kind = match &c[1] {
                "object" => "object",
                "state" => "state",
                "value" => "value",
                _ => "position",
            };
            let n: usize = c[2].parse().unwrap_or(0);
            let e = counters.entry(kind).or_insert(0);
            *e = (*e).max(n);
        }
        let mut assigned: BTreeMap<String, String> = BTreeMap::new();
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        let mut prev_word: Option<String> = None;
        let tokens: Vec<_> = token_pattern().find_iter(&text).collect();
        for (i, m) in tokens.iter().enumerate() {
            let next = tokens.get(i + 1).map(|n| n.as_str());
            out.push_str(&text[last..m.start()]);
            last = m.end();
            let token = m.as_str();
            let before = text[..m.start()].trim_end();
            let sentence_start = before.is_empty() || before.ends_with(['.', '!', '?', ':']);
            if token.starts_with('[') {
                out.push_str(token);
                prev_word = None;
                continue;
            }
            let lower = token.to_lowercase();
            if prev_word.as_deref() == Some("to")
                && lower.chars().all(|c| c.is_ascii_alphabetic())
                && !STOPWORDS.contains(&lower.as_str())
                && self.classify(token, sentence_start, next).is_none()
            {
                lex.canonicalize(&lower);
            }
            prev_word = Some(lower.clone());
            match self.classify(token, sentence_start, next) {
                Some(kind) => {
                    let ph = assigned.entry(lower).or_insert_with(|| {
                        let n = counters.entry(kind).or_insert(0);
                        *n += 1;
                        format!("[{kind}{n}]")
                    });
                    out.push_str(ph);
                }
                None => out.push_str(token),
            }
        }
        out.push_str(&text[last..]);
        out
    }
}

impl AbstractionBackend for RuleAbstractor {
    fn abstract_text(&self, desc: &str, lex: &VerbLexicon) -> Result<(String, Vec<String>), String> {
        let mut lex = lex.clone();
        let before = lex.verbs().len();
        let text = self.run(desc, &mut lex);
        Ok((text, lex.verbs()[before..].to_vec()))
    }
}

/// Drops exact repeats of earlier sentences.
fn dedupe_sentences(text: &str) -> String {
    let mut seen = BTreeSet::new();
    let mut out = String::new();
    let mut start = 0;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut push = |s: &str, out: &mut String| {
        let key = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if key.is_empty() || seen.insert(key) {
            out.push_str(s);
        }
    };
    for (i, c) in &bytes {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            push(&text[start..end], &mut out);
            start = end;
        }
    }
    push(&text[start..], &mut out);
    out
}

/// Abstraction by a language model, asked to replace nouns, adjectives and
/// numbers with placeholders while keeping subject and verbs.
pub struct LlmAbstractor<'a> {
    pub backend: &'a dyn LlmBackend,
    pub params: CompletionParams,
}

impl AbstractionBackend for LlmAbstractor<'_> {
    fn abstract_text(&self, desc: &str, lex: &VerbLexicon) -> Result<(String, Vec<String>), String> {
        let prompt = format!(
            "Rewrite the action description below so that only its subject and verbs remain concrete. \
Replace nouns, adjectives and numbers with numbered placeholders [object1], [state1], [value1], [position1]; \
the same word must always get the same placeholder. Remove repeated sentences. \
Prefer these verbs when one has the same meaning: {}.\n\
Answer with the rewritten description on the first line, then a line `Verbs:` listing the verbs you used.\n\n\
Description:\n{desc}",
            if lex.verbs().is_empty() { "(none yet)".to_string() } else { lex.verbs().join(", ") }
        );
        let reply = self.backend.complete(&[Message::user(prompt)], &self.params).map_err(|e| e.to_string())?;
        let (body, verbs) = match reply.split_once("Verbs:") {
            Some((b, v)) => (b, v),
            None => (reply.as_str(), ""),
        };
        let text = body.trim().to_string();
        if text.is_empty() {
            return Err("empty abstraction".into());
        }
        let verbs = verbs
            .split([',', '\n'])
            .map(|v| v.trim().to_lowercase())
            .filter(|v| !v.is_empty() && v.chars().all(|c| c.is_ascii_alphabetic()))
            .collect();
        Ok((text, verbs))
    }
}

/// Abstracts `desc` with `backend`, falling back to `fallback` when the
/// backend fails. Returns the text and the lexicon extended with new verbs.
pub fn abstract_description(
    desc: &str,
    lex: &VerbLexicon,
    backend: &dyn AbstractionBackend,
    fallback: &RuleAbstractor,
) -> (String, VerbLexicon) {
    let (text, verbs) = match backend.abstract_text(desc, lex) {
        Ok(r) => r,
        Err(e) => {
            warn!(error = %e, "abstraction backend failed; using rule-based fallback");
            fallback.abstract_text(desc, lex).expect("rule abstraction is infallible")
        }
    };
    let mut lex = lex.clone();
    for v in verbs {
        lex.canonicalize(&v);
    }
    (text, lex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fly_description() -> String {
        let text = include_str!("../../../../fixtures/navigation/descriptions.txt");
        let parsed = crate::corpus::parse_descriptions(text).unwrap();
        parsed.actions.into_iter().find(|(name, _)| name == "fly").unwrap().1
    }

    fn rules() -> RuleAbstractor {
        let dom = crate::pddl::parse_domain(include_str!("../../../../fixtures/navigation/domain.pddl")).unwrap();
        RuleAbstractor::for_domain(&dom)
    }

    #[test]
    fn consistent_placeholders() {
        let mut lex = VerbLexicon::default();
        let out = rules().run("Go from position_1 to position_2, then back to position_1.", &mut lex);
        assert_eq!(out.matches("[position1]").count(), 2);
        assert_eq!(out.matches("[position2]").count(), 1);
    }

    #[test]
    fn move_description_kinds() {
        let mut lex = VerbLexicon::default();
        let out = rules().run(&fly_description(), &mut lex);
        let kinds = placeholder_kinds(&out);
        assert_eq!(kinds.get("position"), Some(&2));
        assert_eq!(kinds.get("state"), Some(&1));
        assert_eq!(kinds.get("value"), Some(&2));
        assert_eq!(kinds.get("object"), None);
        assert!(out.contains("uav"));
        assert_eq!(lex.verbs(), ["move"]);
        assert_eq!(out.matches("This costs").count(), 1);
        let flat = out.split_whitespace().collect::<Vec<_>>().join(" ");
        assert!(flat.contains("if two positions are [state1]. This costs [value1] unit of [value2]."), "{flat}");
    }

    #[test]
    fn counted_kinds_stay_literal() {
        let r = RuleAbstractor::new(["at"]).with_kind_words(["uav"]);
        let out = r.run("Two uavs carry 3 crates over three zones.", &mut VerbLexicon::default());
        assert_eq!(out, "Two uavs carry [value1] crates over three zones.");
    }

    #[test]
    fn idempotent() {
        let mut lex = VerbLexicon::default();
        let once = rules().run(&fly_description(), &mut lex);
        let twice = rules().run(&once, &mut lex);
        assert_eq!(once, twice);
    }

    #[test]
    fn fully_abstract_is_fixed_point() {
        let text = "move from [position1] to [position2] if they are [state1].";
        assert_eq!(rules().run(text, &mut VerbLexicon::default()), text);
    }

    #[test]
    fn failing_backend_falls_back() {
        struct Broken;
        impl AbstractionBackend for Broken {
            fn abstract_text(&self, _: &str, _: &VerbLexicon) -> Result<(String, Vec<String>), String> {
                Err("down".into())
            }
        }
        let (text, lex) = abstract_description(&fly_description(), &VerbLexicon::default(), &Broken, &rules());
        assert!(text.contains("[position1]"));
        assert_eq!(lex.verbs(), ["move"]);
    }
}
