//! Plan files: one `(action arg ...)` per line.
//!
//! Step-number prefixes (`0: (fly u1 a b)`), cost suffixes (`[1]`) and `;`
//! comment lines are tolerated so solver output can be read directly.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::ast::{Plan, PlanStep};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

fn step_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:\d+(?:\.\d+)?\s*:\s*)?\(\s*([^()\s]+)((?:\s+[^()\s]+)*)\s*\)\s*(?:\[[^\]]*\])?\s*$")
            .unwrap()
    })
}

/// Parses one step line, or `None` when the line is not a step.
pub fn parse_step(line: &str) -> Option<PlanStep> {
    let caps = step_pattern().captures(line)?;
    let action = caps[1].to_lowercase();
    let args = caps[2].split_whitespace().map(str::to_lowercase).collect();
    Some(PlanStep { action, args })
}

pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        match parse_step(trimmed) {
            Some(step) => steps.push(step),
            None => {
                return Err(PlanParseError {
                    line: i + 1,
                    message: format!("expected `(action arg ...)` but found `{trimmed}`"),
                })
            }
        }
    }
    Ok(Plan::new(steps))
}

/// Lenient variant for solver stdout: non-step lines are skipped.
pub fn extract_plan(text: &str) -> Plan {
    Plan::new(text.lines().filter_map(parse_step).collect())
}

pub fn render_plan(plan: &Plan) -> String {
    plan.steps.iter().map(|s| format!("{s}\n")).collect()
}
