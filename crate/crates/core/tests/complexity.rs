mod common;

use proptest::prelude::*;
use spar_core::complexity::{
    classify, complexity_components, complexity_report, complexity_score, default_threshold, ComplexityClass,
    ComponentVector, Weights,
};
use spar_core::pddl::rational::{int, parse_decimal, ratio};
use spar_core::pddl::{Atom, Condition, Domain, Effect, FluentRef, NumExpr, Signature, Term, Typed};

fn dec(s: &str) -> spar_core::pddl::Rational {
    parse_decimal(s).unwrap()
}

#[test]
fn classify_boundary() {
    let t = default_threshold();
    assert_eq!(t, dec("5.23"));
    assert_eq!(classify(&dec("5.23"), &t), ComplexityClass::Simple);
    assert_eq!(classify(&dec("5.24"), &t), ComplexityClass::Complex);
    assert_eq!(classify(&dec("2.79"), &t), ComplexityClass::Simple);
    assert_eq!(classify(&(dec("5.23") + ratio(1, 1_000_000_000)), &t), ComplexityClass::Complex);
    assert_eq!(classify(&dec("0"), &dec("-1")), ComplexityClass::Complex);
}

#[test]
fn trivial_scores() {
    assert_eq!(complexity_score(&ComponentVector::default(), &Weights::unit()), int(0));
    let ones = ComponentVector {
        n_actions: 1,
        n_types: 1,
        n_predicates: 1,
        n_functions: 1,
        avg_preconditions: int(1),
        avg_effects: int(1),
        interdependency_pred: int(1),
        interdependency_func: int(1),
        action_coupling: int(1),
    };
    assert_eq!(complexity_score(&ones, &Weights::unit()), int(9));
}

#[test]
fn surveillance_components_by_hand() {
    let dom = &common::corpus().get("surveillance").unwrap().domain;
    // fly: 2 preconditions, 2 effects; take-photo: 1 and 1.
    // `at` is read by both actions, `connected` and `photo-taken` by one each.
    // Both effects of fly write `at`, which take-photo reads.
    let expected = ComponentVector {
        n_actions: 2,
        n_types: 1,
        n_predicates: 3,
        n_functions: 0,
        avg_preconditions: ratio(3, 2),
        avg_effects: ratio(3, 2),
        interdependency_pred: ratio(4, 3),
        interdependency_func: int(0),
        action_coupling: int(1),
    };
    assert_eq!(complexity_components(dom), expected);
    let w = Weights::new(["1", ".5", ".5", ".5", "1", "1", "1", "1", "1"].map(dec)).unwrap();
    let by_hand =
        int(2) + ratio(1, 2) * int(1) + ratio(1, 2) * int(3) + ratio(3, 2) + ratio(3, 2) + ratio(4, 3) + int(1);
    assert_eq!(complexity_score(&expected, &w), by_hand);
    assert_eq!(by_hand, ratio(28, 3));
    assert_eq!(complexity_report(dom, &Weights::unit(), &default_threshold()).score, ratio(34, 3));
}

/// Renames every identifier of a domain through `f`.
fn rename(dom: &Domain, f: &dyn Fn(&str) -> String) -> Domain {
    let var = |v: &str| format!("?{}", f(v.trim_start_matches('?')));
    let typed = |t: &Typed| Typed::new(var(&t.name), f(&t.ty));
    let sig = |s: &Signature| Signature::new(f(&s.name), s.params.iter().map(typed).collect());
    let term = |t: &Term| match t {
        Term::Var(v) => Term::Var(var(v)),
        Term::Object(o) => Term::Object(f(o)),
    };
    let atom = |a: &Atom| Atom::new(f(&a.predicate), a.args.iter().map(term).collect());
    let fref = |r: &FluentRef| FluentRef::new(f(&r.function), r.args.iter().map(term).collect());
    fn num(e: &NumExpr, fref: &dyn Fn(&FluentRef) -> FluentRef) -> NumExpr {
        match e {
            NumExpr::Constant(c) => NumExpr::Constant(c.clone()),
            NumExpr::Fluent(r) => NumExpr::Fluent(fref(r)),
            NumExpr::Binary(op, a, b) => NumExpr::binary(*op, num(a, fref), num(b, fref)),
        }
    }
    fn cond(
        c: &Condition,
        atom: &dyn Fn(&Atom) -> Atom,
        fref: &dyn Fn(&FluentRef) -> FluentRef,
        term: &dyn Fn(&Term) -> Term,
    ) -> Condition {
        match c {
            Condition::Atom(a) => Condition::Atom(atom(a)),
            Condition::Not(c) => Condition::Not(Box::new(cond(c, atom, fref, term))),
            Condition::And(cs) => Condition::And(cs.iter().map(|c| cond(c, atom, fref, term)).collect()),
            Condition::Compare(op, a, b) => Condition::Compare(*op, num(a, fref), num(b, fref)),
            Condition::Equals(a, b) => Condition::Equals(term(a), term(b)),
        }
    }
    fn eff(e: &Effect, atom: &dyn Fn(&Atom) -> Atom, fref: &dyn Fn(&FluentRef) -> FluentRef) -> Effect {
        match e {
            Effect::Add(a) => Effect::Add(atom(a)),
            Effect::Delete(a) => Effect::Delete(atom(a)),
            Effect::Numeric(op, r, v) => Effect::Numeric(*op, fref(r), num(v, fref)),
            Effect::And(es) => Effect::And(es.iter().map(|e| eff(e, atom, fref)).collect()),
        }
    }
    let mut d = dom.clone();
    d.name = f(&dom.name);
    for t in &mut d.types {
        t.name = f(&t.name);
        t.parent = t.parent.as_deref().map(f);
    }
    d.predicates = dom.predicates.iter().map(sig).collect();
    d.functions = dom.functions.iter().map(sig).collect();
    for a in &mut d.actions {
        a.name = f(&a.name);
        a.params = a.params.iter().map(typed).collect();
        a.precondition = cond(&a.precondition, &atom, &fref, &term);
        a.effect = eff(&a.effect, &atom, &fref);
    }
    d
}

proptest! {
    #[test]
    fn rename_invariance(domain_index in 0usize..4, salt in "[a-z]{1,6}", seed in any::<u64>(), rotate in 0usize..8) {
        let dom = &common::corpus().entries[domain_index].domain;
        // An injective renaming: distinct names map to distinct salted hashes.
        let f = move |name: &str| {
            let mut h = seed;
            for b in name.bytes() {
                h = h.wrapping_mul(1_099_511_628_211).wrapping_add(u64::from(b));
            }
            format!("{salt}{h:016x}-{}", name.len())
        };
        let mut renamed = rename(dom, &f);
        let n = renamed.actions.len();
        renamed.actions.rotate_left(rotate % n);
        let w = Weights::unit();
        prop_assert_eq!(complexity_components(&renamed), complexity_components(dom));
        prop_assert_eq!(complexity_report(&renamed, &w, &default_threshold()), complexity_report(dom, &w, &default_threshold()));
        let text = spar_core::pddl::render_domain(&renamed);
        let parsed = spar_core::pddl::parse_domain(&text);
        prop_assert!(parsed.is_ok(), "{:?}\n{}", parsed.err(), text);
    }
}

fn prefix(dom: &Domain, n: usize) -> Domain {
    let mut d = dom.clone();
    d.actions.truncate(n);
    d
}

#[test]
fn adding_an_action_increments_n_actions() {
    for e in &common::corpus().entries {
        for n in 1..e.domain.actions.len() {
            let before = complexity_components(&prefix(&e.domain, n));
            let after = complexity_components(&prefix(&e.domain, n + 1));
            assert_eq!(after.n_actions, before.n_actions + 1, "{}", e.domain_id);
        }
    }
}

/// The averaged components let a thin action pull the score down, so the
/// score is not monotone under action addition. In navigation, adding
/// `survey` (one precondition, one effect) after `fly` and `recharge`
/// lowers both averages by more than the extra action adds.
#[test]
fn score_is_not_monotone_under_action_addition() {
    let nav = &common::corpus().get("navigation").unwrap().domain;
    let names: Vec<&str> = nav.actions.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["fly", "recharge", "survey"]);
    let w = Weights::unit();
    let two = complexity_score(&complexity_components(&prefix(nav, 2)), &w);
    let three = complexity_score(&complexity_components(&prefix(nav, 3)), &w);
    assert_eq!((two.clone(), three.clone()), (ratio(39, 2), ratio(58, 3)));
    assert!(three < two);
}

#[test]
fn weights_file_overrides() {
    let w = Weights::parse("n_actions = 2\navg_effects = 0.5\n").unwrap();
    let dom = &common::corpus().get("surveillance").unwrap().domain;
    let unit = complexity_report(dom, &Weights::unit(), &default_threshold()).score;
    let tuned = complexity_report(dom, &w, &default_threshold()).score;
    // n_actions counts once more and avg_effects half as much.
    assert_eq!(tuned, unit + int(2) - ratio(3, 4));
}
