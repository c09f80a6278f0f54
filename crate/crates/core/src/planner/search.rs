use std::collections::{BTreeSet, HashSet, VecDeque};
use std::time::Instant;

use tracing::debug;

use super::{SearchLimits, SolveOutcome, SolveResult, SolveStats};
use crate::pddl::{Action, Condition, Domain, Effect, Plan, PlanStep, Problem};
use crate::validator::{apply_bound, bind, evaluate_condition, initial_state, Binding, State};

#[derive(Debug, Clone)]
pub struct GroundAction<'d> {
    pub action: &'d Action,
    pub args: Vec<String>,
    pub binding: Binding,
}

impl GroundAction<'_> {
    pub fn step(&self) -> PlanStep {
        PlanStep { action: self.action.name.clone(), args: self.args.clone() }
    }
}

/// Predicates no action adds or deletes.
fn static_predicates(dom: &Domain) -> BTreeSet<&str> {
    let mut written = BTreeSet::new();
    for a in &dom.actions {
        for lit in a.effect.literals() {
            if let Effect::Add(x) | Effect::Delete(x) = lit {
                written.insert(x.predicate.as_str());
            }
        }
    }
    dom.predicates.iter().map(|p| p.name.as_str()).filter(|p| !written.contains(p)).collect()
}

/// Instantiates every action over type-compatible objects, in declaration
/// order of actions, parameters and objects. Instances whose static
/// preconditions are false in the initial state are dropped.
pub fn ground_actions<'d>(dom: &'d Domain, prob: &Problem) -> Vec<GroundAction<'d>> {
    let hierarchy = dom.type_hierarchy();
    let statics = static_predicates(dom);
    let init = initial_state(prob);
    let mut out = Vec::new();
    for act in &dom.actions {
        let candidates: Vec<Vec<&str>> = act
            .params
            .iter()
            .map(|p| {
                prob.objects.iter().filter(|o| hierarchy.is_subtype(&o.ty, &p.ty)).map(|o| o.name.as_str()).collect()
            })
            .collect();
        let static_conds: Vec<&Condition> = act
            .precondition
            .conjuncts()
            .into_iter()
            .filter(|c| match c {
                Condition::Atom(a) => statics.contains(a.predicate.as_str()),
                Condition::Not(inner) => {
                    matches!(inner.as_ref(), Condition::Atom(a) if statics.contains(a.predicate.as_str()))
                }
                Condition::Equals(..) => true,
                _ => false,
            })
            .collect();
        let mut idx = vec![0usize; candidates.len()];
        if candidates.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let args: Vec<String> = idx.iter().zip(&candidates).map(|(i, c)| c[*i].to_string()).collect();
            let binding = bind(act, &args);
            if static_conds.iter().all(|c| matches!(evaluate_condition(c, &init, &binding), Ok(true))) {
                out.push(GroundAction { action: act, args, binding });
            }
            // odometer increment, last parameter fastest
            let mut k = candidates.len();
            let exhausted = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < candidates[k].len() {
                    break false;
                }
                idx[k] = 0;
            };
            if exhausted {
                break;
            }
        }
    }
    out
}

fn goal_holds(prob: &Problem, s: &State) -> bool {
    matches!(evaluate_condition(&prob.goal, s, &Binding::new()), Ok(true))
}

/// Breadth-first search over states (atoms plus fluent values). Successors
/// follow grounding order, so results are deterministic and shortest by
/// step count.
pub fn solve(dom: &Domain, prob: &Problem, lim: &SearchLimits) -> SolveResult {
    let started = Instant::now();
    let mut stats = SolveStats::default();
    let finish = |outcome, mut stats: SolveStats| {
        stats.duration = started.elapsed();
        SolveResult { outcome, stats }
    };
    let init = initial_state(prob);
    if goal_holds(prob, &init) {
        return finish(SolveOutcome::Solved { plan: Plan::default() }, stats);
    }
    let actions = ground_actions(dom, prob);
    debug!(ground = actions.len(), "grounded actions");

    // node = (parent node, ground action index, depth)
    let mut nodes: Vec<(usize, usize, usize)> = vec![(usize::MAX, usize::MAX, 0)];
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(init.clone());
    let mut queue = VecDeque::from([(0usize, init)]);
    let mut depth_cut = false;

    while let Some((node, state)) = queue.pop_front() {
        let depth = nodes[node].2;
        if depth >= lim.max_plan_length {
            depth_cut = true;
            continue;
        }
        if stats.expanded >= lim.max_expanded_states {
            return finish(
                SolveOutcome::LimitExceeded { reason: format!("expanded {} states", stats.expanded) },
                stats,
            );
        }
        if started.elapsed() > lim.wall_clock_budget {
            return finish(SolveOutcome::LimitExceeded { reason: "wall-clock budget exhausted".into() }, stats);
        }
        stats.expanded += 1;
        for (gi, ga) in actions.iter().enumerate() {
            if !matches!(evaluate_condition(&ga.action.precondition, &state, &ga.binding), Ok(true)) {
                continue;
            }
            let Ok(next) = apply_bound(&state, &ga.action.effect, &ga.binding) else {
                continue;
            };
            stats.generated += 1;
            if seen.contains(&next) {
                continue;
            }
            let id = nodes.len();
            nodes.push((node, gi, depth + 1));
            if goal_holds(prob, &next) {
                let mut steps = Vec::new();
                let mut cur = id;
                while cur != 0 {
                    let (parent, g, _) = nodes[cur];
                    steps.push(actions[g].step());
                    cur = parent;
                }
                steps.reverse();
                return finish(SolveOutcome::Solved { plan: Plan::new(steps) }, stats);
            }
            seen.insert(next.clone());
            queue.push_back((id, next));
        }
    }
    if depth_cut {
        finish(SolveOutcome::LimitExceeded { reason: format!("no plan within {} steps", lim.max_plan_length) }, stats)
    } else {
        finish(SolveOutcome::ProvedUnsolvable, stats)
    }
}
