//! FORKS: forklifts moving boxes onto shelves. Each forklift perceives the
//! grid through its own `perceive` skill, reacts to `boxInFront` and
//! `shelfInFront`, and deliberates about where to go next.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use stormkit_core::bus::{EventKind, InternalEvent, Subscription};
use stormkit_core::deliberate::{
    post_goal, ActionStep, DistanceReduction, DistanceReductionKs, Goal, GoalId, GoalStatus, Heading, KnowledgeSource,
};
use stormkit_core::effect::Effect;
use stormkit_core::kernel::{AgentContext, AgentSpec, Capabilities, PerceptorSpec, Runtime, SelectorFilter};
use stormkit_core::percept::{BeliefUpdater, PerceivedEvent};
use stormkit_core::react::Reaction;
use stormkit_core::sched::{Poll, Task};
use stormkit_core::{CoreError, Result};
use stormkit_logic::{LogicModule, MentalState, Term, BELIEFS};

use crate::grid::{forklift_skills, GridWorld, SharedWorld};
use crate::report::{Outcome, RunReport};

/// Situation clauses of a forklift. The front cell comes from the forklift
/// itself through `nextLocation`.
pub const DEFAULT_SITUATIONS: &str = "
situation(boxInFront, Box) :- percept(perceive, _, _), baseObject(Me), send(Me, nextLocation, [], point(X, Y)), location(box(Box), X, Y).
situation(shelfInFront, Shelf) :- percept(perceive, _, _), baseObject(Me), send(Me, nextLocation, [], point(X, Y)), location(shelf(Shelf), X, Y), not(stored(Shelf, _)).
";

pub const SITUATIONS_MODULE: &str = "situations";

/// `graspBox0` and `putBox0`.
pub fn default_reactions() -> Vec<Reaction> {
    vec![
        Reaction::new("graspBox0", "boxInFront", "graspBox")
            .when("not(holding(_))")
            .then(Effect::assert("holding(Box)"))
            .then(Effect::retract("location(box(Box), _, _)")),
        Reaction::new("putBox0", "shelfInFront", "putBox")
            .when("holding(B)")
            .then(Effect::retract("holding(B)"))
            .then(Effect::assert("stored(Shelf, B)")),
    ]
}

/// Belief patterns `perceive` refreshes wholesale.
const PERCEIVED: [(&str, usize); 7] = [("at", 2), ("heading", 1), ("grid", 2), ("wall", 2), ("truck", 2), ("location", 3), ("stored", 2)];

fn perceive_updates(e: &PerceivedEvent) -> Vec<(Term, Vec<Term>)> {
    if e.selector != "perceive" {
        return Vec::new();
    }
    let facts = e.result.as_ref().and_then(Term::as_list).unwrap_or_default();
    PERCEIVED
        .iter()
        .map(|&(f, arity)| {
            let pattern = Term::compound(f, (0..arity).map(|i| Term::var(format!("_{i}"))).collect());
            let matching = facts.iter().filter(|t| t.indicator() == Some((f, arity))).cloned().collect();
            (pattern, matching)
        })
        .collect()
}

/// A forklift's picture of the warehouse, read from its beliefs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Map {
    pub width: i64,
    pub height: i64,
    pub at: Option<(i64, i64)>,
    pub heading: Option<Heading>,
    pub holding: Option<Term>,
    pub blocked: BTreeSet<(i64, i64)>,
    pub boxes: BTreeMap<i64, (i64, i64)>,
    pub free_shelves: BTreeMap<i64, (i64, i64)>,
    pub others: BTreeSet<(i64, i64)>,
}

fn pair(x: &Term, y: &Term) -> Option<(i64, i64)> {
    Some((x.as_int()?, y.as_int()?))
}

impl Map {
    pub fn read(ms: &MentalState) -> Map {
        let mut m = Map::default();
        let Some(beliefs) = ms.module(BELIEFS) else { return m };
        let mut shelves = BTreeMap::new();
        let mut stored = BTreeSet::new();
        for c in beliefs.clauses().iter().filter(|c| c.body.is_empty()) {
            let h = &c.head;
            match (h.functor(), h.args()) {
                (Some("grid"), [w, hh]) => {
                    if let Some((w, hh)) = pair(w, hh) {
                        m.width = w;
                        m.height = hh;
                    }
                }
                (Some("at"), [x, y]) => m.at = pair(x, y),
                (Some("heading"), [d]) => m.heading = d.as_atom().and_then(Heading::parse),
                (Some("holding"), [b]) => m.holding = Some(b.clone()),
                (Some("wall" | "truck"), [x, y]) => m.blocked.extend(pair(x, y)),
                (Some("stored"), [s, _]) => stored.extend(s.as_int()),
                (Some("location"), [kind, x, y]) => {
                    let Some(p) = pair(x, y) else { continue };
                    m.blocked.insert(p);
                    let id = kind.args().first().and_then(Term::as_int);
                    match (kind.functor(), id) {
                        (Some("box"), Some(id)) => {
                            m.boxes.insert(id, p);
                        }
                        (Some("shelf"), Some(id)) => {
                            shelves.insert(id, p);
                        }
                        (Some("forklift"), _) => {
                            m.others.insert(p);
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        m.free_shelves = shelves.into_iter().filter(|(s, _)| !stored.contains(s)).collect();
        m
    }

    fn free(&self, p: (i64, i64)) -> bool {
        (0..self.width).contains(&p.0) && (0..self.height).contains(&p.1) && !self.blocked.contains(&p)
    }

    /// Free cells from which `target` can be faced.
    fn docks(&self, target: (i64, i64)) -> Vec<(i64, i64)> {
        HEADINGS
            .iter()
            .map(|h| {
                let (dx, dy) = h.delta();
                (target.0 - dx, target.1 - dy)
            })
            .filter(|&p| self.free(p))
            .collect()
    }

    /// Shortest path (excluding the start) to any of `goals`.
    pub fn path(&self, from: (i64, i64), goals: &[(i64, i64)]) -> Option<Vec<(i64, i64)>> {
        let mut prev: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            if goals.contains(&p) {
                let mut out = Vec::new();
                let mut cur = p;
                while cur != from {
                    out.push(cur);
                    cur = prev[&cur];
                }
                out.reverse();
                return Some(out);
            }
            for h in HEADINGS {
                let (dx, dy) = h.delta();
                let q = (p.0 + dx, p.1 + dy);
                if self.free(q) && q != from && !prev.contains_key(&q) {
                    prev.insert(q, p);
                    queue.push_back(q);
                }
            }
        }
        None
    }

    /// Whether another forklift is strictly closer to `target`, as the crow
    /// walks.
    fn nearer_other(&self, target: (i64, i64)) -> bool {
        let manhattan = |p: (i64, i64)| (p.0 - target.0).abs() + (p.1 - target.1).abs();
        self.at.is_some_and(|me| self.others.iter().any(|&o| manhattan(o) < manhattan(me)))
    }

    /// Moves still needed to stand next to `target` and face it.
    pub fn approach_distance(&self, target: (i64, i64)) -> Option<usize> {
        let at = self.at?;
        let docks = self.docks(target);
        if docks.contains(&at) {
            return Some(usize::from(self.heading != heading_towards(at, target)));
        }
        self.path(at, &docks).map(|p| p.len() + 1)
    }
}

const HEADINGS: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

fn heading_towards(from: (i64, i64), to: (i64, i64)) -> Option<Heading> {
    HEADINGS.into_iter().find(|h| {
        let (dx, dy) = h.delta();
        (from.0 + dx, from.1 + dy) == to
    })
}

fn turn_step(h: Heading) -> ActionStep {
    ActionStep::new("turn", vec![h.to_term()])
        .effect(Effect::retract("heading(_)"))
        .effect(Effect::Assert(Term::compound("heading", vec![h.to_term()])))
}

fn advance_step(to: (i64, i64)) -> ActionStep {
    ActionStep::new("advance", vec![])
        .effect(Effect::retract("at(_, _)"))
        .effect(Effect::Assert(Term::compound("at", vec![Term::int(to.0), Term::int(to.1)])))
}

/// `approach(X, Y)`: stand on a free neighbour of (X, Y) facing it. The
/// distance is the number of cells still to cross plus one final turn, so
/// every batch (an optional turn and one advance, or the last turn) lowers
/// it by one.
#[derive(Clone, Copy, Debug, Default)]
pub struct Approach;

/// Distance reported for targets with no path; the empty plan blocks them.
const UNREACHABLE: f64 = 1e9;

impl Approach {
    fn target(goal: &Goal) -> Result<(i64, i64)> {
        match goal.expression.args() {
            [x, y] => pair(x, y).ok_or_else(|| CoreError::InvalidSpec(format!("goal {} needs integer coordinates", goal.expression))),
            _ => Err(CoreError::InvalidSpec(format!("goal {} is not approach/2", goal.expression))),
        }
    }
}

impl DistanceReduction for Approach {
    fn accepts(&self, goal: &Term) -> bool {
        goal.indicator() == Some(("approach", 2))
    }

    fn distance(&self, state: &MentalState, goal: &Goal) -> Result<f64> {
        let map = Map::read(state);
        Ok(map.approach_distance(Self::target(goal)?).map_or(UNREACHABLE, |d| d as f64))
    }

    fn get_plan_for(&self, state: &MentalState, goal: &Goal) -> Result<Vec<ActionStep>> {
        let target = Self::target(goal)?;
        let map = Map::read(state);
        let Some(at) = map.at else { return Ok(Vec::new()) };
        let docks = map.docks(target);
        if docks.contains(&at) {
            return Ok(heading_towards(at, target).map(turn_step).into_iter().collect());
        }
        let Some(next) = map.path(at, &docks).and_then(|p| p.first().copied()) else { return Ok(Vec::new()) };
        let h = heading_towards(at, next).expect("path steps are adjacent");
        let mut steps = Vec::new();
        if map.heading != Some(h) {
            steps.push(turn_step(h));
        }
        steps.push(advance_step(next));
        Ok(steps)
    }
}

/// Decides what to fetch next: the nearest free shelf while holding a box,
/// the nearest reachable box otherwise. Targets another forklift is closer
/// to come last.
#[derive(Debug)]
pub struct Strategy {
    id: String,
    dirty: bool,
    current: Option<GoalId>,
}

impl Strategy {
    pub fn new(id: &str) -> Self {
        Strategy { id: id.to_string(), dirty: true, current: None }
    }

    fn choose(map: &Map) -> Option<(i64, i64)> {
        let candidates: Vec<(i64, i64)> = match map.holding {
            Some(_) => map.free_shelves.values().copied().collect(),
            None => map.boxes.values().copied().collect(),
        };
        candidates
            .into_iter()
            .filter_map(|t| map.approach_distance(t).map(|d| (map.nearer_other(t), d, t)))
            .min()
            .filter(|(_, d, _)| *d > 0)
            .map(|(_, _, t)| t)
    }
}

impl KnowledgeSource for Strategy {
    fn id(&self) -> &str {
        &self.id
    }

    fn subscriptions(&self) -> Vec<EventKind> {
        vec![EventKind::BeliefChanged, EventKind::GoalAchieved, EventKind::GoalDropped, EventKind::PlanInvalidated]
    }

    fn on_event(&mut self, _e: &InternalEvent, _cx: &AgentContext) -> Result<()> {
        self.dirty = true;
        Ok(())
    }

    fn work(&mut self, cx: &AgentContext) -> Result<bool> {
        if !self.dirty {
            return Ok(false);
        }
        self.dirty = false;
        if let Some(g) = self.current.and_then(|id| cx.board.goal(id)) {
            if g.status == GoalStatus::Committed {
                return Ok(true);
            }
        }
        let map = Map::read(&cx.store.snapshot());
        self.current = Self::choose(&map).map(|(x, y)| post_goal(cx, Term::compound("approach", vec![Term::int(x), Term::int(y)])));
        Ok(true)
    }
}

/// Calls `perceive` on one forklift whenever its previous perception has
/// been taken in, so beliefs never lag behind a queue of stale readings.
/// Perception is not work, so the task never reports itself busy.
pub struct Sensing {
    cx: Arc<AgentContext>,
    arrivals: Subscription,
    awaiting: bool,
}

impl Sensing {
    pub fn new(cx: Arc<AgentContext>) -> Self {
        let arrivals = cx.bus.subscribe([EventKind::PerceptionArrived]);
        Sensing { cx, arrivals, awaiting: false }
    }
}

impl Task for Sensing {
    fn label(&self) -> String {
        format!("{}/sensing", self.cx.name)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        let after = Term::atom("after");
        if self.arrivals.drain().iter().any(|e| e.payload.args().get(3) == Some(&after)) {
            self.awaiting = false;
        }
        if !self.awaiting {
            self.awaiting = true;
            if let Err(e) = self.cx.invoke("perceive", &[]) {
                self.awaiting = false;
                self.cx.trace.record(&self.cx.name, "SensingFault", Term::atom(e.to_string()));
            }
        }
        Poll::Idle
    }
}

#[derive(Clone, Debug)]
pub struct ForkliftPlacement {
    pub name: String,
    pub x: i64,
    pub y: i64,
    pub heading: Heading,
}

/// Everything a FORKS run needs.
#[derive(Clone, Debug)]
pub struct ForksScenario {
    pub layout: Vec<String>,
    pub forklifts: Vec<ForkliftPlacement>,
    pub situations: String,
    pub reactions: Vec<Reaction>,
    /// Whether forklifts plan their own moves; without it they only react.
    pub deliberate: bool,
    /// Facts each forklift starts with.
    pub beliefs: String,
    /// Whether each forklift perceives every round; otherwise perception is
    /// driven from outside.
    pub sensing: bool,
}

impl ForksScenario {
    pub fn new(layout: &[&str], forklifts: Vec<ForkliftPlacement>) -> Self {
        ForksScenario {
            layout: layout.iter().map(|s| s.to_string()).collect(),
            forklifts,
            situations: DEFAULT_SITUATIONS.to_string(),
            reactions: default_reactions(),
            deliberate: true,
            beliefs: String::new(),
            sensing: true,
        }
    }

    pub fn world(&self) -> Result<GridWorld> {
        let mut w = GridWorld::from_layout(&self.layout).map_err(|e| CoreError::InvalidSpec(e.to_string()))?;
        for f in &self.forklifts {
            w.place(&f.name, f.x, f.y, f.heading).map_err(|e| CoreError::InvalidSpec(e.to_string()))?;
        }
        if self.forklifts.is_empty() {
            return Err(CoreError::InvalidSpec("no forklifts".into()));
        }
        Ok(w)
    }

    pub fn spec(&self, name: &str) -> Result<AgentSpec> {
        let caps = Capabilities { perception: true, reaction: true, deliberation: self.deliberate, communication: false };
        let mut spec = AgentSpec::new(name, caps)
            .module(LogicModule::from_text(BELIEFS, &self.beliefs)?)
            .situations(LogicModule::from_text(SITUATIONS_MODULE, &self.situations)?)
            .perceptor(
                PerceptorSpec::new(name, SelectorFilter::only(["perceive"])).handler(|| Box::new(BeliefUpdater::new(perceive_updates))),
            );
        for r in &self.reactions {
            spec = spec.reaction(r.clone());
        }
        if self.deliberate {
            spec = spec
                .knowledge_source(|| Box::new(Strategy::new("strategy")))
                .knowledge_source(|| Box::new(DistanceReductionKs::new("approach", Approach)));
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug)]
pub struct ForksOptions {
    pub seed: u64,
    pub max_ticks: u64,
}

#[derive(Debug)]
pub struct ForksRun {
    pub report: RunReport,
    pub world: GridWorld,
}

/// Builds the runtime, one agent per forklift, with sensing tasks spawned.
pub fn setup(scenario: &ForksScenario, seed: u64) -> Result<(Runtime, SharedWorld)> {
    let world: SharedWorld = Arc::new(Mutex::new(scenario.world()?));
    let mut rt = Runtime::new(seed);
    for f in &scenario.forklifts {
        let base = forklift_skills(&world, &f.name);
        let cx = Arc::clone(&rt.create_agent(scenario.spec(&f.name)?, base)?.cx);
        if scenario.sensing {
            rt.spawn_task(Box::new(Sensing::new(cx)));
        }
    }
    Ok((rt, world))
}

/// Runs until every box is shelved or the tick limit. The box count is
/// checked against its initial value before every round.
pub fn run_forks(scenario: &ForksScenario, opts: &ForksOptions) -> Result<ForksRun> {
    let (mut rt, world) = setup(scenario, opts.seed)?;
    let initial = world.lock().initial_boxes;
    let outcome = loop {
        let count = world.lock().count();
        if count.total() != initial {
            break Outcome::Fault(format!("box count {} differs from initial {initial}", count.total()));
        }
        if count.shelved == initial {
            break Outcome::Solved;
        }
        if rt.rounds() >= opts.max_ticks {
            break Outcome::TickLimit;
        }
        rt.round();
    };
    let world = world.lock().clone();
    let c = world.count();
    let snapshot = format!("floor {} carried {} shelved {}", c.floor, c.carried, c.shelved);
    let report = RunReport { outcome, ticks: rt.rounds(), messages: rt.router.routed(), trace: rt.trace.render(), snapshot };
    Ok(ForksRun { report, world })
}
