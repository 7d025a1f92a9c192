use proptest::prelude::*;
use stormkit_logic::{parse_term, solve, unify, Clause, Engine, MentalState, SolveOptions, Substitution, Term};

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::atom),
        prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
        (0i64..3).prop_map(Term::int),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        (prop::sample::select(vec!["f", "g"]), prop::collection::vec(inner, 1..=3)).prop_map(|(f, args)| Term::compound(f, args))
    })
}

fn fact() -> impl Strategy<Value = Term> {
    (prop::sample::select(vec!["p", "q"]), prop::collection::vec(0i64..4, 1..=2))
        .prop_map(|(f, xs)| Term::compound(f, xs.into_iter().map(Term::int).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unify_is_symmetric_and_unifies(a in term(), b in term()) {
        let ab = unify(&a, &b, &Substitution::new());
        let ba = unify(&b, &a, &Substitution::new());
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(s1), Some(s2)) = (ab, ba) {
            prop_assert_eq!(s1.apply(&a), s1.apply(&b));
            prop_assert_eq!(s2.apply(&a), s2.apply(&b));
            prop_assert_eq!(s1.apply(&a), s2.apply(&a));
            let once = s1.apply(&a);
            prop_assert_eq!(s1.apply(&once), once);
        }
    }

    #[test]
    fn print_parse_round_trip(t in term()) {
        prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assert_then_retract_restores(base in prop::collection::vec(fact(), 0..8), extra in fact()) {
        let mut ms = MentalState::new();
        for f in &base {
            ms.assert_fact("beliefs", f.clone()).unwrap();
        }
        let q = parse_term("p(X)").unwrap();
        let q2 = parse_term("q(X,Y)").unwrap();
        let run = |ms: &MentalState| -> (Vec<Substitution>, Vec<Substitution>) {
            (
                solve(&q, ms, &["beliefs"], 64).map(Result::unwrap).collect(),
                solve(&q2, ms, &["beliefs"], 64).map(Result::unwrap).collect(),
            )
        };
        let before = run(&ms);
        ms.assert_clause("beliefs", Clause::fact(extra.clone()).unwrap()).unwrap();
        // retraction removes the first match, so append-then-retract removes an
        // earlier duplicate if one exists; the solution multiset is what survives
        let removed = ms.retract_clause("beliefs", &extra).unwrap();
        prop_assert!(removed.is_some());
        let after = run(&ms);
        let sorted = |mut v: Vec<Substitution>| { v.sort_by_key(|s| s.to_string()); v };
        prop_assert_eq!(sorted(before.0), sorted(after.0));
        prop_assert_eq!(sorted(before.1), sorted(after.1));
    }
}

#[test]
fn left_recursion_terminates_under_depth_limit() {
    let mut ms = MentalState::new();
    ms.load_text("beliefs", "loop(X) :- loop(X).\nnat(0).\nnat(s(X)) :- nat(X).\n").unwrap();
    let n = solve(&parse_term("loop(a)").unwrap(), &ms, &["beliefs"], 100).count();
    assert_eq!(n, 0);
    let nats = solve(&parse_term("nat(N)").unwrap(), &ms, &["beliefs"], 50).count();
    assert_eq!(nats, 50);
}

#[test]
fn exponential_search_hits_step_budget() {
    let mut ms = MentalState::new();
    ms.load_text("beliefs", "b(0). b(1).\nw(0).\nw(s(N)) :- b(_), w(N), fail.\n").unwrap();
    let engine = Engine::default().with_options(SolveOptions { depth_limit: 512, step_limit: 20_000 });
    let deep = (0..20).fold(Term::int(0), |t, _| Term::compound("s", vec![t]));
    let goal = Term::compound("w", vec![deep]);
    let mut sols = engine.solve(&goal, &ms, &["beliefs"], None);
    assert!(sols.next().is_none());
    assert!(sols.steps() <= 20_001);
}
