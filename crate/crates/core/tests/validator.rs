mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use proptest::prelude::*;
use spar_core::pddl::{parse_domain, parse_plan, parse_problem, Plan, PlanStep};
use spar_core::validator::{validate_plan, FailureReason, Outcome};

/// Expected result of a plan: `None` for valid, else the failing step, with
/// `plan.len()` meaning the goal does not hold at the end.
type Expected = Option<usize>;

/// Hand-written simulation of the single-UAV surveillance domain.
fn surveillance_oracle(
    start: &str,
    roads: &BTreeSet<(String, String)>,
    goal_photos: &[&str],
    goal_at: &str,
    plan: &[(String, Vec<String>)],
) -> Expected {
    let mut at = start.to_string();
    let mut photos = BTreeSet::new();
    for (i, (name, args)) in plan.iter().enumerate() {
        match (name.as_str(), args.as_slice()) {
            ("fly", [from, to]) if at == *from && roads.contains(&(from.clone(), to.clone())) => at = to.clone(),
            ("take-photo", [l]) if at == *l => {
                photos.insert(l.clone());
            }
            _ => return Some(i),
        }
    }
    if goal_photos.iter().all(|p| photos.contains(*p)) && at == goal_at {
        None
    } else {
        Some(plan.len())
    }
}

fn outcome_step(o: &Outcome) -> Expected {
    match o {
        Outcome::Valid => None,
        Outcome::FailedAt { step, .. } => Some(*step),
    }
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

struct Surveillance {
    domain: spar_core::pddl::Domain,
    problem: spar_core::pddl::Problem,
    plan: Plan,
    roads: BTreeSet<(String, String)>,
}

fn surveillance() -> Surveillance {
    let domain = parse_domain(&common::read_fixture("surveillance/domain.pddl")).unwrap();
    let problem = parse_problem(&common::read_fixture("surveillance/problems/medium-1.pddl"), &domain).unwrap();
    let plan = parse_plan(&common::read_fixture("surveillance/plans/medium-1.plan")).unwrap();
    let roads = problem
        .init_atoms
        .iter()
        .filter(|g| g.name == "connected")
        .map(|g| (g.args[0].clone(), g.args[1].clone()))
        .collect();
    Surveillance { domain, problem, plan, roads }
}

fn steps(plan: &Plan) -> Vec<(String, Vec<String>)> {
    plan.steps.iter().map(|s| (s.action.clone(), s.args.clone())).collect()
}

#[test]
fn reference_plan_is_valid() {
    let s = surveillance();
    assert_eq!(s.plan.len(), 5);
    let report = validate_plan(&s.domain, &s.problem, &s.plan);
    assert_eq!(report.outcome, Outcome::Valid);
    assert!(report.goal_satisfied);
    assert!(report.trace.iter().all(|t| t.applicable));
}

#[test]
fn every_ordering_matches_the_oracle() {
    let s = surveillance();
    let started = Instant::now();
    let orderings = permutations(&s.plan.steps);
    assert_eq!(orderings.len(), 120);
    let mut failures = 0;
    for order in orderings {
        let plan = Plan::new(order);
        let expected = surveillance_oracle("base", &s.roads, &["waypoint1", "waypoint2"], "base", &steps(&plan));
        let report = validate_plan(&s.domain, &s.problem, &plan);
        assert_eq!(outcome_step(&report.outcome), expected, "{plan:?}");
        if let Some(step) = expected {
            failures += 1;
            if step < plan.len() {
                assert!(matches!(
                    report.outcome,
                    Outcome::FailedAt { reason: FailureReason::PreconditionNotSatisfied { .. }, .. }
                ));
                assert_eq!(report.trace.len(), step + 1);
                assert!(!report.trace[step].applicable);
            }
        }
    }
    assert_eq!(failures, 119, "only the reference ordering succeeds");
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn unknown_action_and_bad_arguments() {
    let s = surveillance();
    let r = validate_plan(&s.domain, &s.problem, &Plan::new(vec![PlanStep::new("teleport", &["base"])]));
    assert!(matches!(r.outcome, Outcome::FailedAt { step: 0, reason: FailureReason::UnknownAction { .. } }));
    let r = validate_plan(&s.domain, &s.problem, &Plan::new(vec![PlanStep::new("fly", &["base"])]));
    assert!(matches!(r.outcome, Outcome::FailedAt { step: 0, reason: FailureReason::BadArguments { .. } }));
    let r = validate_plan(&s.domain, &s.problem, &Plan::new(vec![PlanStep::new("take-photo", &["moon"])]));
    assert!(matches!(r.outcome, Outcome::FailedAt { step: 0, reason: FailureReason::BadArguments { .. } }));
}

/// Hand-written simulation of the navigation domain with integer energy.
fn navigation_oracle(prob: &spar_core::pddl::Problem, plan: &[(String, Vec<String>)]) -> Expected {
    let has = |name: &str, args: &[&str]| {
        prob.init_atoms.iter().any(|g| g.name == name && g.args.iter().map(String::as_str).eq(args.iter().copied()))
    };
    let mut at: BTreeMap<String, String> = BTreeMap::new();
    let mut energy: BTreeMap<String, i64> = BTreeMap::new();
    let mut capacity: BTreeMap<String, i64> = BTreeMap::new();
    for g in &prob.init_atoms {
        if g.name == "at" {
            at.insert(g.args[0].clone(), g.args[1].clone());
        }
    }
    for (g, v) in &prob.init_fluents {
        let v: i64 = v.to_integer().try_into().unwrap();
        match g.name.as_str() {
            "energy" => energy.insert(g.args[0].clone(), v),
            _ => capacity.insert(g.args[0].clone(), v),
        };
    }
    let mut surveyed: BTreeSet<String> =
        prob.init_atoms.iter().filter(|g| g.name == "surveyed").map(|g| g.args[0].clone()).collect();
    for (i, (name, args)) in plan.iter().enumerate() {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let ok = match (name.as_str(), a.as_slice()) {
            ("fly", [u, from, to]) => {
                let ok =
                    at.get(*u).map(String::as_str) == Some(*from) && has("connected", &[from, to]) && energy[*u] >= 1;
                if ok {
                    at.insert(u.to_string(), to.to_string());
                    *energy.get_mut(*u).unwrap() -= 1;
                }
                ok
            }
            ("recharge", [u, p]) => {
                let ok =
                    at.get(*u).map(String::as_str) == Some(*p) && has("has-station", &[p]) && energy[*u] < capacity[*u];
                if ok {
                    energy.insert(u.to_string(), capacity[*u]);
                }
                ok
            }
            ("survey", [u, p]) => {
                let ok = at.get(*u).map(String::as_str) == Some(*p);
                if ok {
                    surveyed.insert(p.to_string());
                }
                ok
            }
            _ => false,
        };
        if !ok {
            return Some(i);
        }
    }
    // Every navigation goal in the corpus is a conjunction of `surveyed` and `at` atoms.
    let mut goal_atoms = Vec::new();
    prob.goal.for_each_atom(&mut |atom| goal_atoms.push(atom.clone()));
    let holds = goal_atoms.iter().all(|atom| {
        let args: Vec<&str> = atom.args.iter().map(|t| t.as_str()).collect();
        match (atom.predicate.as_str(), args.as_slice()) {
            ("surveyed", [p]) => surveyed.contains(*p),
            ("at", [u, p]) => at.get(*u).map(String::as_str) == Some(*p),
            other => panic!("unexpected goal atom {other:?}"),
        }
    });
    if holds {
        None
    } else {
        Some(plan.len())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_surveillance_plans_match_the_oracle(
        picks in proptest::collection::vec((0usize..2, 0usize..3, 0usize..3), 0..8),
    ) {
        let s = surveillance();
        let locs = ["base", "waypoint1", "waypoint2"];
        let plan = Plan::new(
            picks
                .iter()
                .map(|(kind, a, b)| match kind {
                    0 => PlanStep::new("fly", &[locs[*a], locs[*b]]),
                    _ => PlanStep::new("take-photo", &[locs[*a]]),
                })
                .collect(),
        );
        let expected = surveillance_oracle("base", &s.roads, &["waypoint1", "waypoint2"], "base", &steps(&plan));
        prop_assert_eq!(outcome_step(&validate_plan(&s.domain, &s.problem, &plan).outcome), expected);
    }

    #[test]
    fn random_navigation_plans_match_the_oracle(
        problem_index in 0usize..9,
        seed in proptest::collection::vec(any::<proptest::sample::Index>(), 0..8),
        kinds in proptest::collection::vec(0usize..3, 8),
    ) {
        let corpus = common::corpus();
        let entry = corpus.get("navigation").unwrap();
        let prob = &entry.problems[problem_index].problem;
        let uavs: Vec<&str> = prob.objects.iter().filter(|o| o.ty == "uav").map(|o| o.name.as_str()).collect();
        let positions: Vec<&str> = prob.objects.iter().filter(|o| o.ty == "position").map(|o| o.name.as_str()).collect();
        let plan = Plan::new(
            seed.iter()
                .zip(&kinds)
                .map(|(ix, kind)| {
                    let u = *ix.get(&uavs);
                    let a = *ix.get(&positions);
                    let b = positions[(ix.index(positions.len()) + 1) % positions.len()];
                    match kind {
                        0 => PlanStep::new("fly", &[u, a, b]),
                        1 => PlanStep::new("recharge", &[u, a]),
                        _ => PlanStep::new("survey", &[u, a]),
                    }
                })
                .collect(),
        );
        let expected = navigation_oracle(prob, &steps(&plan));
        prop_assert_eq!(outcome_step(&validate_plan(&entry.domain, prob, &plan).outcome), expected);
    }
}

#[test]
fn reference_navigation_plans_match_the_oracle() {
    let corpus = common::corpus();
    let entry = corpus.get("navigation").unwrap();
    for p in &entry.problems {
        let plan = p.gt_plan.as_ref().unwrap();
        assert_eq!(navigation_oracle(&p.problem, &steps(plan)), None, "{}", p.key());
    }
}
