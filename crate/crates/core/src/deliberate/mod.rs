//! Deliberation: goals, partial plans, and the knowledge sources that
//! produce, repair and execute them over the agent's event bus.

mod distance;
mod ks;
mod planner;

use std::collections::BTreeMap;
use std::fmt;

use parking_lot::Mutex;
use stormkit_logic::Term;

use crate::bus::EventKind;
use crate::effect::Effect;
use crate::kernel::AgentContext;

pub use distance::{get_plan, DistanceReduction, DistanceReductionKs, GetPlan, GotoXY, Heading, BLOCK_AFTER};
pub use ks::{adapt_plan, execute, execute_step, Adaptation, Executor, KnowledgeSource, KsTask, PlanAdapter, StepOutcome};
pub use planner::{run_planner, ActionSchema, PlannerKs, DEFAULT_NODE_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoalId(pub u64);

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

impl GoalId {
    pub fn to_term(self) -> Term {
        Term::atom(self.to_string())
    }

    pub fn from_term(t: &Term) -> Option<GoalId> {
        t.as_atom()?.strip_prefix('g')?.parse().ok().map(GoalId)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlanId(pub u64);

impl fmt::Display for PlanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl PlanId {
    pub fn to_term(self) -> Term {
        Term::atom(self.to_string())
    }

    pub fn from_term(t: &Term) -> Option<PlanId> {
        t.as_atom()?.strip_prefix('p')?.parse().ok().map(PlanId)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalStatus {
    Pending,
    Committed,
    Achieved,
    Dropped,
    /// No progress over several cycles.
    Blocked,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Goal {
    pub id: GoalId,
    pub expression: Term,
    pub status: GoalStatus,
}

impl Goal {
    pub fn to_term(&self) -> Term {
        Term::compound("goal", vec![self.id.to_term(), self.expression.clone()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionStep {
    pub selector: String,
    pub args: Vec<Term>,
    /// Facts the step relies on; the adapter invalidates a plan when one is retracted.
    pub preconditions: Vec<Term>,
    pub effects: Vec<Effect>,
}

impl ActionStep {
    pub fn new(selector: &str, args: Vec<Term>) -> Self {
        ActionStep { selector: selector.to_string(), args, preconditions: Vec::new(), effects: Vec::new() }
    }

    pub fn requires(mut self, fact: Term) -> Self {
        self.preconditions.push(fact);
        self
    }

    pub fn effect(mut self, e: Effect) -> Self {
        self.effects.push(e);
        self
    }

    pub fn action(&self) -> Term {
        Term::compound(self.selector.as_str(), self.args.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStatus {
    Open,
    Executing,
    Invalidated,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialPlan {
    pub id: PlanId,
    pub goal: GoalId,
    pub steps: Vec<ActionStep>,
    /// Index of the next step to run; earlier steps have been executed.
    pub cursor: usize,
    pub status: PlanStatus,
    /// Knowledge source that produced it.
    pub producer: String,
}

impl PartialPlan {
    pub fn remaining(&self) -> &[ActionStep] {
        &self.steps[self.cursor.min(self.steps.len())..]
    }

    pub fn is_live(&self) -> bool {
        matches!(self.status, PlanStatus::Open | PlanStatus::Executing)
    }

    pub fn to_term(&self) -> Term {
        Term::compound("plan", vec![self.id.to_term(), self.goal.to_term(), Term::list(self.remaining().iter().map(ActionStep::action))])
    }
}

#[derive(Default)]
struct Board {
    goals: BTreeMap<GoalId, Goal>,
    plans: BTreeMap<PlanId, PartialPlan>,
    next_goal: u64,
    next_plan: u64,
}

/// The agent's current goals and plans.
#[derive(Default)]
pub struct GoalBoard {
    inner: Mutex<Board>,
}

impl fmt::Debug for GoalBoard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.inner.lock();
        f.debug_struct("GoalBoard").field("goals", &b.goals.len()).field("plans", &b.plans.len()).finish()
    }
}

impl GoalBoard {
    pub fn add_goal(&self, expression: Term) -> Goal {
        let mut b = self.inner.lock();
        b.next_goal += 1;
        let g = Goal { id: GoalId(b.next_goal), expression, status: GoalStatus::Committed };
        b.goals.insert(g.id, g.clone());
        g
    }

    pub fn goal(&self, id: GoalId) -> Option<Goal> {
        self.inner.lock().goals.get(&id).cloned()
    }

    pub fn goals(&self) -> Vec<Goal> {
        self.inner.lock().goals.values().cloned().collect()
    }

    pub fn set_goal_status(&self, id: GoalId, status: GoalStatus) {
        if let Some(g) = self.inner.lock().goals.get_mut(&id) {
            g.status = status;
        }
    }

    pub fn add_plan(&self, goal: GoalId, steps: Vec<ActionStep>, producer: &str) -> PartialPlan {
        let mut b = self.inner.lock();
        b.next_plan += 1;
        let p = PartialPlan { id: PlanId(b.next_plan), goal, steps, cursor: 0, status: PlanStatus::Open, producer: producer.to_string() };
        b.plans.insert(p.id, p.clone());
        p
    }

    pub fn plan(&self, id: PlanId) -> Option<PartialPlan> {
        self.inner.lock().plans.get(&id).cloned()
    }

    pub fn plans(&self) -> Vec<PartialPlan> {
        self.inner.lock().plans.values().cloned().collect()
    }

    pub fn update_plan<R>(&self, id: PlanId, f: impl FnOnce(&mut PartialPlan) -> R) -> Option<R> {
        self.inner.lock().plans.get_mut(&id).map(f)
    }

    pub fn live_plans_for(&self, goal: GoalId) -> Vec<PlanId> {
        let b = self.inner.lock();
        b.plans.values().filter(|p| p.goal == goal && p.is_live()).map(|p| p.id).collect()
    }
}

/// Stores the goal and announces it with `GoalCommitted`.
pub fn post_goal(cx: &AgentContext, expression: Term) -> GoalId {
    let g = cx.board.add_goal(expression);
    cx.bus.emit(EventKind::GoalCommitted, g.to_term());
    g.id
}

/// Marks the goal dropped and invalidates its open plans.
pub fn drop_goal(cx: &AgentContext, id: GoalId) {
    let Some(g) = cx.board.goal(id) else { return };
    if matches!(g.status, GoalStatus::Achieved | GoalStatus::Dropped) {
        return;
    }
    cx.board.set_goal_status(id, GoalStatus::Dropped);
    for pid in cx.board.live_plans_for(id) {
        invalidate(cx, pid, "goal_dropped");
    }
    cx.bus.emit(EventKind::GoalDropped, g.to_term());
}

pub fn achieve_goal(cx: &AgentContext, id: GoalId) {
    let Some(g) = cx.board.goal(id) else { return };
    if g.status == GoalStatus::Achieved {
        return;
    }
    cx.board.set_goal_status(id, GoalStatus::Achieved);
    cx.bus.emit(EventKind::GoalAchieved, g.to_term());
}

pub fn block_goal(cx: &AgentContext, id: GoalId) {
    cx.board.set_goal_status(id, GoalStatus::Blocked);
    for pid in cx.board.live_plans_for(id) {
        cx.board.update_plan(pid, |p| p.status = PlanStatus::Invalidated);
    }
    cx.bus.emit(EventKind::PlanInvalidated, Term::compound("plan", vec![Term::atom("none"), id.to_term(), Term::atom("blocked")]));
}

pub fn invalidate(cx: &AgentContext, pid: PlanId, reason: &str) {
    let changed = cx.board.update_plan(pid, |p| {
        let was_live = p.is_live();
        p.status = PlanStatus::Invalidated;
        was_live.then_some(p.goal)
    });
    if let Some(Some(goal)) = changed {
        cx.bus.emit(EventKind::PlanInvalidated, Term::compound("plan", vec![pid.to_term(), goal.to_term(), Term::atom(reason)]));
    }
}

/// Registers a produced plan and announces it with `PlanProduced`.
pub fn publish_plan(cx: &AgentContext, goal: GoalId, steps: Vec<ActionStep>, producer: &str) -> PlanId {
    let p = cx.board.add_plan(goal, steps, producer);
    cx.bus.emit(EventKind::PlanProduced, p.to_term());
    p.id
}

/// Pulls `(plan, goal)` out of a plan or action event payload.
pub fn payload_ids(t: &Term) -> Option<(Option<PlanId>, GoalId)> {
    let args = t.args();
    match (t.functor(), args) {
        (Some("plan" | "action"), [p, g, ..]) => Some((PlanId::from_term(p), GoalId::from_term(g)?)),
        _ => None,
    }
}
