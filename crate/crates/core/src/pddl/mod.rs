//! PDDL data model, parsing and rendering.

pub mod ast;
pub mod parser;
pub mod plan;
pub mod rational;
pub mod render;
pub mod sexpr;

pub use ast::*;
pub use parser::{parse_domain, parse_problem, FluentKind};
pub use plan::{extract_plan, parse_plan, render_plan, PlanParseError};
pub use rational::Rational;
pub use render::{render_action, render_domain, render_problem};
