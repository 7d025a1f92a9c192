use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use proptest::prelude::*;
use stormkit_core::bus::ControlKind;
use stormkit_core::deliberate::{run_planner, ActionSchema, DistanceReductionKs, GoalStatus, GotoXY, Heading, PlannerKs};
use stormkit_core::effect::Effect;
use stormkit_core::kernel::{AgentSpec, BaseObject, Capabilities, Runtime};
use stormkit_core::CoreError;
use stormkit_logic::{parse_term, Engine, LogicModule, MentalState, Term, BELIEFS};

#[derive(Debug, Default)]
struct Bot {
    pos: (i64, i64),
    heading: Option<Heading>,
    advances: usize,
    turns: usize,
}

fn bot(name: &str, size: i64, state: Arc<Mutex<Bot>>) -> BaseObject {
    let s1 = Arc::clone(&state);
    BaseObject::new(name, "bot")
        .with_skill("turn", 1, move |a| {
            let h = a[0].as_atom().and_then(Heading::parse).ok_or_else(|| CoreError::failed("bad_heading"))?;
            let mut b = s1.lock();
            b.heading = Some(h);
            b.turns += 1;
            Ok(Term::void())
        })
        .with_skill("advance", 0, move |_| {
            let mut b = state.lock();
            let (dx, dy) = b.heading.unwrap_or(Heading::N).delta();
            let next = (b.pos.0 + dx, b.pos.1 + dy);
            if !(0..size).contains(&next.0) || !(0..size).contains(&next.1) {
                return Err(CoreError::failed("blocked"));
            }
            b.pos = next;
            b.advances += 1;
            Ok(Term::void())
        })
}

fn distances(rt: &Runtime) -> Vec<f64> {
    rt.trace
        .lines()
        .iter()
        .filter(|l| l.kind == "Distance")
        .map(|l| parse_term(&l.payload).unwrap().args()[1].clone())
        .map(|d| match d {
            Term::Number(n) => n.as_f64(),
            other => panic!("distance {other}"),
        })
        .collect()
}

#[test]
fn goto_reaches_the_target_in_manhattan_steps() {
    let state = Arc::new(Mutex::new(Bot::default()));
    let mut rt = Runtime::new(1);
    let spec = AgentSpec::new("bot", Capabilities { deliberation: true, ..Capabilities::none() })
        .module(LogicModule::from_text(BELIEFS, "at(0,0). heading(n).").unwrap())
        .knowledge_source(|| Box::new(DistanceReductionKs::new("goto", GotoXY::default())));
    rt.create_agent(spec, bot("bot", 20, Arc::clone(&state))).unwrap();
    rt.control("bot", ControlKind::AchieveGoal, "goto", parse_term("goto(10,7)").unwrap()).unwrap();
    rt.run_until_quiet(10_000);

    let b = state.lock();
    assert_eq!(b.pos, (10, 7));
    assert_eq!(b.advances, 17);
    assert_eq!(b.turns, 14);
    let d = distances(&rt);
    assert_eq!(d.len(), 18);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert_eq!(*d.last().unwrap(), 0.0);
    let h = rt.agent("bot").unwrap();
    assert!(h.cx.holds(&parse_term("at(10,7)").unwrap()).unwrap());
    assert_eq!(h.cx.board.goals()[0].status, GoalStatus::Achieved);
    assert_eq!(rt.trace.count("GoalAchieved"), 1);
}

#[test]
fn goto_blocks_when_it_cannot_progress() {
    // beliefs claim a position the world never reaches, so the skill fails
    let state = Arc::new(Mutex::new(Bot { pos: (0, 0), ..Bot::default() }));
    let mut rt = Runtime::new(1);
    let spec = AgentSpec::new("bot", Capabilities { deliberation: true, ..Capabilities::none() })
        .module(LogicModule::from_text(BELIEFS, "at(5,5). heading(n).").unwrap())
        .knowledge_source(|| Box::new(DistanceReductionKs::new("goto", GotoXY::default())));
    rt.create_agent(spec, bot("bot", 20, state)).unwrap();
    rt.control("bot", ControlKind::AchieveGoal, "goto", parse_term("goto(5,0)").unwrap()).unwrap();
    rt.run_until_quiet(10_000);
    let h = rt.agent("bot").unwrap();
    assert_eq!(h.cx.board.goals()[0].status, GoalStatus::Blocked);
    assert!(rt.trace.count("ActionFailed") >= 1);
}

fn path_domain() -> Vec<ActionSchema> {
    vec![ActionSchema::new("move", vec![Term::var("X"), Term::var("Y")])
        .when("at(X), edge(X, Y)")
        .effect(Effect::retract("at(X)"))
        .effect(Effect::assert("at(Y)"))]
}

fn graph_state(edges: &[(usize, usize)]) -> MentalState {
    let mut text = "at(n0).\n".to_string();
    for (a, b) in edges {
        text.push_str(&format!("edge(n{a}, n{b}).\n"));
    }
    let mut ms = MentalState::new();
    ms.insert_module(LogicModule::from_text(BELIEFS, &text).unwrap());
    ms
}

fn shortest(n: usize, edges: &[(usize, usize)], target: usize) -> Option<usize> {
    let mut dist = vec![None; n];
    dist[0] = Some(0);
    let mut q = VecDeque::from([0]);
    while let Some(u) = q.pop_front() {
        for &(a, b) in edges {
            if a == u && dist[b].is_none() {
                dist[b] = Some(dist[u].unwrap() + 1);
                q.push_back(b);
            }
        }
    }
    dist[target]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]
    #[test]
    fn planner_finds_shortest_paths(
        n in 2usize..7,
        raw in prop::collection::vec((0usize..7, 0usize..7), 0..14),
        target in 1usize..7,
    ) {
        let target = target % n;
        let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect::<BTreeSet<_>>().into_iter().collect();
        let ms = graph_state(&edges);
        let goal = parse_term(&format!("at(n{target})")).unwrap();
        let result = run_planner(&goal, &ms, &path_domain(), &Engine::default(), 10_000);
        match shortest(n, &edges, target) {
            Some(len) => {
                let plan = result.unwrap();
                prop_assert_eq!(plan.len(), len);
                let mut here = 0usize;
                for step in &plan {
                    let from = step.args[0].as_atom().unwrap()[1..].parse::<usize>().unwrap();
                    let to = step.args[1].as_atom().unwrap()[1..].parse::<usize>().unwrap();
                    prop_assert_eq!(from, here);
                    prop_assert!(edges.contains(&(from, to)));
                    here = to;
                }
                prop_assert_eq!(here, target);
            }
            None => {
                let is_no_plan = matches!(result, Err(CoreError::NoPlanFound { .. }));
                prop_assert!(is_no_plan);
            }
        }
    }
}

#[test]
fn planner_budget_is_enforced() {
    let edges: Vec<(usize, usize)> = (0..30).map(|i| (i, i + 1)).collect();
    let ms = graph_state(&edges);
    let goal = parse_term("at(n30)").unwrap();
    let r = run_planner(&goal, &ms, &path_domain(), &Engine::default(), 5);
    assert!(matches!(r, Err(CoreError::NoPlanFound { expanded: 5 })));
}

#[test]
fn planner_ks_executes_its_plan() {
    let world = Arc::new(Mutex::new(Vec::<String>::new()));
    let w = Arc::clone(&world);
    let base = BaseObject::new("walker", "walker").with_skill("move", 2, move |a| {
        w.lock().push(format!("{}->{}", a[0], a[1]));
        Ok(Term::void())
    });
    let mut rt = Runtime::new(4);
    let spec = AgentSpec::new("walker", Capabilities { deliberation: true, ..Capabilities::none() })
        .module(LogicModule::from_text(BELIEFS, "at(n0). edge(n0,n1). edge(n1,n2). edge(n0,n3). edge(n3,n2).").unwrap())
        .knowledge_source(|| Box::new(PlannerKs::new("planner", path_domain()).for_goals(&["at"])));
    rt.create_agent(spec, base).unwrap();
    rt.control("walker", ControlKind::AchieveGoal, "planner", parse_term("at(n2)").unwrap()).unwrap();
    rt.run_until_quiet(1_000);
    assert_eq!(*world.lock(), vec!["n0->n1".to_string(), "n1->n2".to_string()]);
    let h = rt.agent("walker").unwrap();
    assert!(h.cx.holds(&parse_term("at(n2)").unwrap()).unwrap());
    assert_eq!(h.cx.board.goals()[0].status, GoalStatus::Achieved);
}

#[test]
fn unreachable_goals_are_dropped() {
    let mut rt = Runtime::new(4);
    let base = BaseObject::new("walker", "walker").with_skill("move", 2, |_| Ok(Term::void()));
    let spec = AgentSpec::new("walker", Capabilities { deliberation: true, ..Capabilities::none() })
        .module(LogicModule::from_text(BELIEFS, "at(n0). edge(n1,n2).").unwrap())
        .knowledge_source(|| Box::new(PlannerKs::new("planner", path_domain())));
    rt.create_agent(spec, base).unwrap();
    rt.control("walker", ControlKind::AchieveGoal, "planner", parse_term("at(n2)").unwrap()).unwrap();
    rt.run_until_quiet(1_000);
    let h = rt.agent("walker").unwrap();
    assert_eq!(h.cx.board.goals()[0].status, GoalStatus::Dropped);
}
