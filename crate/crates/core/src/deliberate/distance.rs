//! Distance-reduction planning: `get_plan` is the fixed skeleton, `distance`
//! and `get_plan_for` are the hot-spots an application fills in.

use std::collections::BTreeMap;
use std::fmt;

use stormkit_logic::{MentalState, Term, BELIEFS};

use super::{achieve_goal, block_goal, payload_ids, publish_plan, ActionStep, Goal, GoalId, GoalStatus, PlanId};
use crate::bus::{EventKind, InternalEvent};
use crate::effect::Effect;
use crate::error::{CoreError, Result};
use crate::kernel::AgentContext;

/// Consecutive non-improving cycles after which a goal is blocked.
pub const BLOCK_AFTER: u32 = 3;

pub trait DistanceReduction: Send {
    /// Goals this source takes on.
    fn accepts(&self, goal: &Term) -> bool;

    /// Nonnegative; zero exactly when the goal holds.
    fn distance(&self, _state: &MentalState, _goal: &Goal) -> Result<f64> {
        Err(CoreError::HotSpotUndefined("distance"))
    }

    /// A nonempty batch of steps expected to reduce the distance.
    fn get_plan_for(&self, _state: &MentalState, _goal: &Goal) -> Result<Vec<ActionStep>> {
        Err(CoreError::HotSpotUndefined("getPlanFor"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GetPlan {
    Achieved,
    Plan { distance: f64, steps: Vec<ActionStep> },
}

pub fn get_plan(ks: &dyn DistanceReduction, goal: &Goal, state: &MentalState) -> Result<GetPlan> {
    let d = ks.distance(state, goal)?;
    if d <= 0.0 {
        return Ok(GetPlan::Achieved);
    }
    let steps = ks.get_plan_for(state, goal)?;
    Ok(GetPlan::Plan { distance: d, steps })
}

#[derive(Debug, Default)]
struct Tracking {
    last: Option<f64>,
    stalls: u32,
    plan: Option<PlanId>,
}

/// Interleaves planning and execution: each completed batch triggers the
/// next `get_plan` until the goal is reached, dropped or blocked.
pub struct DistanceReductionKs<D> {
    id: String,
    hot_spots: D,
    active: BTreeMap<GoalId, Tracking>,
}

impl<D: DistanceReduction> DistanceReductionKs<D> {
    pub fn new(id: &str, hot_spots: D) -> Self {
        DistanceReductionKs { id: id.to_string(), hot_spots, active: BTreeMap::new() }
    }

    fn cycle(&mut self, goal_id: GoalId, cx: &AgentContext) -> Result<()> {
        let Some(goal) = cx.board.goal(goal_id) else { return Ok(()) };
        if goal.status != GoalStatus::Committed {
            self.active.remove(&goal_id);
            return Ok(());
        }
        let state = cx.store.snapshot();
        match get_plan(&self.hot_spots, &goal, &state) {
            Ok(GetPlan::Achieved) => {
                cx.trace.record(&cx.name, "Distance", distance_term(goal_id, 0.0));
                self.active.remove(&goal_id);
                achieve_goal(cx, goal_id);
            }
            Ok(GetPlan::Plan { distance, steps }) => {
                cx.trace.record(&cx.name, "Distance", distance_term(goal_id, distance));
                let t = self.active.entry(goal_id).or_default();
                match t.last {
                    Some(last) if distance >= last => t.stalls += 1,
                    _ => t.stalls = 0,
                }
                t.last = Some(distance);
                if t.stalls >= BLOCK_AFTER || steps.is_empty() {
                    self.active.remove(&goal_id);
                    block_goal(cx, goal_id);
                    return Ok(());
                }
                t.plan = Some(publish_plan(cx, goal_id, steps, &self.id));
            }
            Err(e) => {
                self.active.remove(&goal_id);
                block_goal(cx, goal_id);
                return Err(e);
            }
        }
        Ok(())
    }

    fn owner_of(&self, plan: PlanId) -> Option<GoalId> {
        self.active.iter().find(|(_, t)| t.plan == Some(plan)).map(|(g, _)| *g)
    }
}

fn distance_term(goal: GoalId, d: f64) -> Term {
    Term::compound("distance", vec![goal.to_term(), Term::float(d)])
}

impl<D: DistanceReduction> super::KnowledgeSource for DistanceReductionKs<D> {
    fn id(&self) -> &str {
        &self.id
    }

    fn subscriptions(&self) -> Vec<EventKind> {
        vec![EventKind::GoalCommitted, EventKind::GoalDropped, EventKind::ActionExecuted, EventKind::PlanInvalidated]
    }

    fn on_event(&mut self, e: &InternalEvent, cx: &AgentContext) -> Result<()> {
        match e.kind {
            EventKind::GoalCommitted => {
                let (Some(id), Some(expr)) = (e.payload.args().first().and_then(GoalId::from_term), e.payload.args().get(1)) else {
                    return Ok(());
                };
                if self.hot_spots.accepts(expr) {
                    self.active.insert(id, Tracking::default());
                    self.cycle(id, cx)?;
                }
            }
            EventKind::GoalDropped => {
                if let Some(id) = e.payload.args().first().and_then(GoalId::from_term) {
                    self.active.remove(&id);
                }
            }
            EventKind::ActionExecuted => {
                let done = e.payload.args().get(3).and_then(Term::as_atom) == Some("done");
                if let (true, Some((Some(pid), _))) = (done, payload_ids(&e.payload)) {
                    if let Some(goal) = self.owner_of(pid) {
                        self.cycle(goal, cx)?;
                    }
                }
            }
            EventKind::PlanInvalidated => {
                if let Some((Some(pid), _)) = payload_ids(&e.payload) {
                    if let Some(goal) = self.owner_of(pid) {
                        self.cycle(goal, cx)?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    /// Unit step; y grows downward, so north is -y.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::N => Heading::W,
            Heading::W => Heading::S,
            Heading::S => Heading::E,
            Heading::E => Heading::N,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Heading::N => "n",
            Heading::E => "e",
            Heading::S => "s",
            Heading::W => "w",
        }
    }

    pub fn parse(s: &str) -> Option<Heading> {
        match s {
            "n" => Some(Heading::N),
            "e" => Some(Heading::E),
            "s" => Some(Heading::S),
            "w" => Some(Heading::W),
            _ => None,
        }
    }

    pub fn to_term(self) -> Term {
        Term::atom(self.as_str())
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Moves toward `goto(X,Y)` one cell at a time, reading `at(X,Y)` and
/// `heading(H)` from the beliefs. Each batch is an optional `turn(H)` and
/// one `advance`, along the axis with the larger remaining delta (ties go to
/// x). Headings default to north when unknown.
#[derive(Clone, Debug)]
pub struct GotoXY {
    pub goal_functor: String,
}

impl Default for GotoXY {
    fn default() -> Self {
        GotoXY { goal_functor: "goto".into() }
    }
}

impl GotoXY {
    pub fn position(state: &MentalState) -> Option<(i64, i64)> {
        state.module(BELIEFS)?.clauses().iter().find_map(|c| match (c.head.functor(), c.head.args()) {
            (Some("at"), [x, y]) => Some((x.as_int()?, y.as_int()?)),
            _ => None,
        })
    }

    pub fn heading(state: &MentalState) -> Heading {
        state
            .module(BELIEFS)
            .and_then(|m| {
                m.clauses().iter().find_map(|c| match (c.head.functor(), c.head.args()) {
                    (Some("heading"), [h]) => h.as_atom().and_then(Heading::parse),
                    _ => None,
                })
            })
            .unwrap_or(Heading::N)
    }

    fn target(&self, goal: &Goal) -> Result<(i64, i64)> {
        match goal.expression.args() {
            [x, y] => match (x.as_int(), y.as_int()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(CoreError::InvalidSpec(format!("goal {} needs integer coordinates", goal.expression))),
            },
            _ => Err(CoreError::InvalidSpec(format!("goal {} is not {}/2", goal.expression, self.goal_functor))),
        }
    }

    /// Heading that reduces the larger remaining delta; ties favour x.
    pub fn preferred(from: (i64, i64), to: (i64, i64)) -> Option<Heading> {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        if dx == 0 && dy == 0 {
            return None;
        }
        Some(if dx.abs() >= dy.abs() {
            if dx > 0 {
                Heading::E
            } else {
                Heading::W
            }
        } else if dy > 0 {
            Heading::S
        } else {
            Heading::N
        })
    }
}

impl DistanceReduction for GotoXY {
    fn accepts(&self, goal: &Term) -> bool {
        goal.indicator() == Some((self.goal_functor.as_str(), 2))
    }

    fn distance(&self, state: &MentalState, goal: &Goal) -> Result<f64> {
        let (tx, ty) = self.target(goal)?;
        let (x, y) = Self::position(state).ok_or_else(|| CoreError::InvalidSpec("no at/2 belief".into()))?;
        Ok((((tx - x).pow(2) + (ty - y).pow(2)) as f64).sqrt())
    }

    fn get_plan_for(&self, state: &MentalState, goal: &Goal) -> Result<Vec<ActionStep>> {
        let to = self.target(goal)?;
        let (x, y) = Self::position(state).ok_or_else(|| CoreError::InvalidSpec("no at/2 belief".into()))?;
        let Some(want) = Self::preferred((x, y), to) else { return Ok(Vec::new()) };
        let mut steps = Vec::new();
        let current = Self::heading(state);
        if current != want {
            steps.push(
                ActionStep::new("turn", vec![want.to_term()])
                    .effect(Effect::Retract(Term::compound("heading", vec![Term::var("_")])))
                    .effect(Effect::Assert(Term::compound("heading", vec![want.to_term()]))),
            );
        }
        let (dx, dy) = want.delta();
        let here = Term::compound("at", vec![Term::int(x), Term::int(y)]);
        steps.push(
            ActionStep::new("advance", vec![])
                .requires(here.clone())
                .effect(Effect::Retract(here))
                .effect(Effect::Assert(Term::compound("at", vec![Term::int(x + dx), Term::int(y + dy)]))),
        );
        Ok(steps)
    }
}
