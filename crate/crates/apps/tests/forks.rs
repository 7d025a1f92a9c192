use proptest::prelude::*;
use stormkit_apps::forks::{run_forks, setup, ForkliftPlacement, ForksOptions, ForksScenario, Map};
use stormkit_apps::grid::{Cell, GridWorld};
use stormkit_apps::Outcome;
use stormkit_core::deliberate::Heading;
use stormkit_core::CoreError;
use stormkit_logic::{parse_query, parse_term, Term, BELIEFS};

fn fl(name: &str, x: i64, y: i64, h: Heading) -> ForkliftPlacement {
    ForkliftPlacement { name: name.into(), x, y, heading: h }
}

fn opts(seed: u64, max_ticks: u64) -> ForksOptions {
    ForksOptions { seed, max_ticks }
}

const WAREHOUSE: [&str; 6] = ["##########", "#T.B....S#", "#T..B...S#", "#...B...S#", "#T......S#", "##########"];

fn scripted(beliefs: &str) -> ForksScenario {
    let mut s = ForksScenario::new(&[".B.", "...", "..."], vec![fl("f", 1, 1, Heading::N)]);
    s.deliberate = false;
    s.sensing = false;
    s.beliefs = beliefs.to_string();
    s
}

fn grasps(trace: &str) -> usize {
    trace.lines().filter(|l| l.contains("reaction(graspBox0")).count()
}

#[test]
fn box_in_front_is_grasped_once() {
    let (mut rt, world) = setup(&scripted(""), 1).unwrap();
    rt.invoke("f", "perceive", &[]).unwrap();
    rt.run_until_quiet(50);
    let trace = rt.trace.render();
    let asserted = trace.find("asserted(location(box(1),1,0))").expect("box fact asserted");
    let detected = trace.find("situation(boxInFront,1)").expect("occurrence");
    assert!(asserted < detected);
    assert_eq!(grasps(&trace), 1);
    let ms = rt.agent("f").unwrap().mental_state();
    let beliefs = ms.module(BELIEFS).unwrap();
    assert!(beliefs.contains_match(&parse_term("holding(1)").unwrap()));
    assert!(!beliefs.contains_match(&parse_term("location(box(1), _, _)").unwrap()));
    assert_eq!(world.lock().count().floor, 0);
    assert_eq!(world.lock().count().carried, 1);

    for _ in 0..3 {
        rt.invoke("f", "perceive", &[]).unwrap();
        rt.run_until_quiet(50);
    }
    assert_eq!(grasps(&rt.trace.render()), 1);
}

#[test]
fn already_holding_grasps_nothing() {
    let (mut rt, world) = setup(&scripted("holding(7)."), 1).unwrap();
    rt.invoke("f", "perceive", &[]).unwrap();
    rt.run_until_quiet(50);
    let trace = rt.trace.render();
    assert!(trace.contains("situation(boxInFront,1)"));
    assert_eq!(grasps(&trace), 0);
    assert_eq!(world.lock().count().floor, 1);
}

#[test]
fn next_location_through_logic() {
    let s = ForksScenario::new(&[".....", ".....", ".....", ".....", "....."], vec![fl("f", 1, 3, Heading::E)]);
    let (rt, _) = setup(&s, 1).unwrap();
    let cx = &rt.agent("f").unwrap().cx;
    let q = parse_query("baseObject(Me), send(Me, nextLocation, [], F)").unwrap();
    let goal = Term::compound(",", q);
    let sol = cx.solve_first(&goal).unwrap().unwrap();
    assert_eq!(sol.get("F"), Some(parse_term("point(2,3)").unwrap()));
    let bad = Term::compound(",", parse_query("baseObject(Me), send(Me, nope, [], F)").unwrap());
    let err = cx.solve_first(&bad).unwrap_err();
    assert!(err.to_string().contains("nope"), "{err}");
}

#[test]
fn warehouse_is_cleared() {
    let s = ForksScenario::new(&WAREHOUSE, vec![fl("f1", 2, 4, Heading::N), fl("f2", 6, 1, Heading::W)]);
    let r = run_forks(&s, &opts(1, 3000)).unwrap();
    assert_eq!(r.report.outcome, Outcome::Solved, "{}", r.report.summary());
    assert_eq!(r.world.count().shelved, 3);
    assert_eq!(r.report.messages, 0);
}

#[test]
fn no_boxes_is_solved_at_once() {
    let s = ForksScenario::new(&["....", "...S"], vec![fl("f", 0, 0, Heading::E)]);
    let r = run_forks(&s, &opts(1, 100)).unwrap();
    assert_eq!(r.report.outcome, Outcome::Solved);
    assert_eq!(r.report.ticks, 0);
}

#[test]
fn walled_off_box_hits_the_limit() {
    let s = ForksScenario::new(&["###...", "#B#...", "###..S"], vec![fl("f", 4, 0, Heading::S)]);
    let r = run_forks(&s, &opts(1, 200)).unwrap();
    assert_eq!(r.report.outcome, Outcome::TickLimit);
    assert_eq!(r.report.outcome.exit_code(), 2);
    assert_eq!(r.world.count().floor, 1);
}

#[test]
fn bad_layouts_are_rejected() {
    let ragged = ForksScenario::new(&["...", ".."], vec![fl("f", 0, 0, Heading::N)]);
    assert!(matches!(run_forks(&ragged, &opts(1, 10)), Err(CoreError::InvalidSpec(_))));
    let on_wall = ForksScenario::new(&["#.."], vec![fl("f", 0, 0, Heading::N)]);
    assert!(matches!(run_forks(&on_wall, &opts(1, 10)), Err(CoreError::InvalidSpec(_))));
    let nobody = ForksScenario::new(&["B.S"], vec![]);
    assert!(matches!(run_forks(&nobody, &opts(1, 10)), Err(CoreError::InvalidSpec(_))));
}

#[test]
fn skills_touch_only_the_grid() {
    let mut w = GridWorld::from_layout(&[".B", "S."]).unwrap();
    w.place("f", 0, 0, Heading::E).unwrap();
    assert_eq!(w.grasp("f").unwrap(), 1);
    assert_eq!(w.cell(1, 0), Some(Cell::Empty));
    assert!(w.grasp("f").is_err());
    w.turn("f", Heading::S).unwrap();
    assert_eq!(w.put("f").unwrap(), 1);
    assert_eq!(w.cell(0, 1), Some(Cell::Shelf(1, Some(1))));
    assert!(w.advance("f").is_err());
    w.turn("f", Heading::E).unwrap();
    w.advance("f").unwrap();
    assert_eq!(w.front("f").unwrap(), (2, 0));
    assert!(w.advance("f").is_err());
}

#[test]
fn map_path_is_shortest() {
    let mut w = GridWorld::from_layout(&["..#..", "..#..", "....."]).unwrap();
    w.place("f", 0, 0, Heading::N).unwrap();
    let mut ms = stormkit_logic::MentalState::new();
    for f in w.percepts("f").unwrap() {
        ms.assert_fact(BELIEFS, f).unwrap();
    }
    let map = Map::read(&ms);
    let path = map.path((0, 0), &[(4, 0)]).unwrap();
    assert_eq!(path.len(), 8);
    assert_eq!(map.approach_distance((4, 0)), Some(8));
}

fn layout() -> impl Strategy<Value = (Vec<String>, (i64, i64))> {
    (3usize..7, 3usize..6).prop_flat_map(|(w, h)| {
        let cells = proptest::collection::vec(prop_oneof![6 => Just('.'), 1 => Just('#'), 1 => Just('B'), 1 => Just('S')], w * h);
        (cells, 0..w as i64, 0..h as i64).prop_map(move |(cells, x, y)| {
            let mut cells = cells;
            cells[y as usize * w + x as usize] = '.';
            let rows = cells.chunks(w).map(|r| r.iter().collect()).collect();
            (rows, (x, y))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boxes_are_conserved((rows, (x, y)) in layout(), seed in 0u64..100) {
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        let s = ForksScenario::new(&rows, vec![fl("f", x, y, Heading::N)]);
        let r = run_forks(&s, &opts(seed, 150)).unwrap();
        prop_assert!(!matches!(r.report.outcome, Outcome::Fault(_)), "{}", r.report.outcome);
        prop_assert_eq!(r.world.count().total(), r.world.initial_boxes);
    }
}
