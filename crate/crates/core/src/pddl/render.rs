//! Canonical text rendering. Parsing the output of these functions yields an
//! AST equal to the one rendered.

use std::fmt::Write;

use super::ast::*;
use super::rational::{to_decimal, Rational};

fn constant(v: &Rational) -> String {
    to_decimal(v).unwrap_or_else(|| format!("(/ {} {})", v.numer(), v.denom()))
}

fn args(out: &mut String, args: &[Term]) {
    for a in args {
        out.push(' ');
        out.push_str(a.as_str());
    }
}

pub fn render_num_expr(e: &NumExpr) -> String {
    match e {
        NumExpr::Constant(v) => constant(v),
        NumExpr::Fluent(r) => render_fluent(r),
        NumExpr::Binary(op, a, b) => {
            format!("({} {} {})", op.symbol(), render_num_expr(a), render_num_expr(b))
        }
    }
}

pub fn render_fluent(r: &FluentRef) -> String {
    let mut s = format!("({}", r.function);
    args(&mut s, &r.args);
    s.push(')');
    s
}

pub fn render_atom(a: &Atom) -> String {
    let mut s = format!("({}", a.predicate);
    args(&mut s, &a.args);
    s.push(')');
    s
}

pub fn render_condition(c: &Condition) -> String {
    match c {
        Condition::Atom(a) => render_atom(a),
        Condition::Not(c) => format!("(not {})", render_condition(c)),
        Condition::And(cs) => {
            let mut s = String::from("(and");
            for c in cs {
                s.push(' ');
                s.push_str(&render_condition(c));
            }
            s.push(')');
            s
        }
        Condition::Compare(op, a, b) => {
            format!("({} {} {})", op.symbol(), render_num_expr(a), render_num_expr(b))
        }
        Condition::Equals(a, b) => format!("(= {} {})", a.as_str(), b.as_str()),
    }
}

pub fn render_effect(e: &Effect) -> String {
    match e {
        Effect::Add(a) => render_atom(a),
        Effect::Delete(a) => format!("(not {})", render_atom(a)),
        Effect::Numeric(op, r, v) => {
            format!("({} {} {})", op.keyword(), render_fluent(r), render_num_expr(v))
        }
        Effect::And(es) => {
            let mut s = String::from("(and");
            for e in es {
                s.push(' ');
                s.push_str(&render_effect(e));
            }
            s.push(')');
            s
        }
    }
}

fn typed_list(items: &[Typed]) -> String {
    items.iter().map(|t| format!("{} - {}", t.name, t.ty)).collect::<Vec<_>>().join(" ")
}

pub fn render_signature(sig: &Signature) -> String {
    if sig.params.is_empty() {
        format!("({})", sig.name)
    } else {
        format!("({} {})", sig.name, typed_list(&sig.params))
    }
}

pub fn render_action(a: &Action) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(:action {}", a.name);
    let _ = writeln!(s, "  :parameters ({})", typed_list(&a.params));
    let _ = writeln!(s, "  :precondition {}", render_condition(&a.precondition));
    let _ = writeln!(s, "  :effect {})", render_effect(&a.effect));
    s
}

/// Fluent declarations in the bracketed form used inside generation prompts.
pub fn render_declarations(predicates: &[Signature], functions: &[Signature]) -> String {
    let mut s = String::new();
    if !predicates.is_empty() {
        s.push_str("(:predicates\n");
        for p in predicates {
            let _ = writeln!(s, "  {}", render_signature(p));
        }
        s.push_str(")\n");
    }
    if !functions.is_empty() {
        s.push_str("(:functions\n");
        for f in functions {
            let _ = writeln!(s, "  {} - number", render_signature(f));
        }
        s.push_str(")\n");
    }
    s
}

fn indent(block: &str, by: &str) -> String {
    block.lines().map(|l| format!("{by}{l}\n")).collect()
}

pub fn render_domain(d: &Domain) -> String {
    let mut body = String::new();
    if !d.requirements.is_empty() {
        let flags: Vec<String> = d.requirements.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(body, "(:requirements {})", flags.join(" "));
    }
    if !d.types.is_empty() {
        let types: Vec<String> =
            d.types.iter().map(|t| format!("{} - {}", t.name, t.parent.as_deref().unwrap_or(ROOT_TYPE))).collect();
        let _ = writeln!(body, "(:types {})", types.join(" "));
    }
    body.push_str(&render_declarations(&d.predicates, &d.functions));
    for a in &d.actions {
        body.push_str(&render_action(a));
    }
    if body.is_empty() {
        return format!("(define (domain {}))\n", d.name);
    }
    format!("(define (domain {})\n{})\n", d.name, indent(&body, "  "))
}

pub fn render_problem(p: &Problem) -> String {
    let mut body = String::new();
    if !p.domain_name.is_empty() {
        let _ = writeln!(body, "(:domain {})", p.domain_name);
    }
    if !p.objects.is_empty() {
        let _ = writeln!(body, "(:objects {})", typed_list(&p.objects));
    }
    body.push_str("(:init\n");
    for g in &p.init_atoms {
        let _ = writeln!(body, "  {g}");
    }
    for (g, v) in &p.init_fluents {
        let _ = writeln!(body, "  (= {g} {})", constant(v));
    }
    body.push_str(")\n");
    let _ = writeln!(body, "(:goal {})", render_condition(&p.goal));
    format!("(define (problem {})\n{})\n", p.name, indent(&body, "  "))
}
