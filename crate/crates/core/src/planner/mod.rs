//! Plan production: a built-in breadth-first search for small numeric
//! STRIPS problems and an adapter for an external solver process.

mod external;
mod search;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::pddl::{Domain, Plan, Problem};

pub use external::{external_solve, ExternalError, ExternalSolverConfig};
pub use search::{ground_actions, solve, GroundAction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    pub max_expanded_states: usize,
    pub wall_clock_budget: Duration,
    pub max_plan_length: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_expanded_states: 200_000, wall_clock_budget: Duration::from_secs(60), max_plan_length: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum SolveOutcome {
    Solved { plan: Plan },
    ProvedUnsolvable,
    LimitExceeded { reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub expanded: usize,
    pub generated: usize,
    pub duration: Duration,
    /// Captured standard error of an external solver.
    pub stderr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub outcome: SolveOutcome,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            SolveOutcome::Solved { plan } => Some(plan),
            _ => None,
        }
    }
}

/// Which planner the evaluation harness runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum Engine {
    Builtin(SearchLimits),
    External(ExternalSolverConfig),
}

impl Default for Engine {
    fn default() -> Self {
        Engine::Builtin(SearchLimits::default())
    }
}

impl Engine {
    /// Solves an in-memory pair. The external engine receives rendered
    /// copies written to a temporary directory.
    pub fn solve(&self, dom: &Domain, prob: &Problem) -> Result<SolveResult, ExternalError> {
        match self {
            Engine::Builtin(lim) => Ok(solve(dom, prob, lim)),
            Engine::External(cfg) => {
                let dir = tempfile::tempdir().map_err(ExternalError::Io)?;
                let d = dir.path().join("domain.pddl");
                let p = dir.path().join("problem.pddl");
                std::fs::write(&d, crate::pddl::render_domain(dom)).map_err(ExternalError::Io)?;
                std::fs::write(&p, crate::pddl::render_problem(prob)).map_err(ExternalError::Io)?;
                external_solve(cfg, &d, &p)
            }
        }
    }
}
