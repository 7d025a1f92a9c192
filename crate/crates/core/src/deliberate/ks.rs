use std::collections::VecDeque;
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver};
use stormkit_logic::{unify, MentalState, Substitution, Term, BELIEFS};

use super::{drop_goal, invalidate, payload_ids, post_goal, GoalId, PartialPlan, PlanId, PlanStatus};
use crate::bus::{ControlEvent, ControlKind, EventKind, InternalEvent, Subscription};
use crate::error::{CoreError, Result};
use crate::kernel::AgentContext;
use crate::sched::{Poll, Task};

/// A concurrent deliberation component living on the agent's event bus.
pub trait KnowledgeSource: Send {
    fn id(&self) -> &str;

    fn subscriptions(&self) -> Vec<EventKind>;

    fn on_event(&mut self, e: &InternalEvent, cx: &AgentContext) -> Result<()>;

    /// Control events other than kill/wait/resume.
    fn on_control(&mut self, c: &ControlEvent, cx: &AgentContext) -> Result<()> {
        match c.kind {
            ControlKind::AchieveGoal => {
                post_goal(cx, c.payload.clone());
            }
            ControlKind::DropGoal => {
                if let Some(id) = GoalId::from_term(&c.payload) {
                    drop_goal(cx, id);
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Internal work not driven by an event; `true` when something was done.
    fn work(&mut self, _cx: &AgentContext) -> Result<bool> {
        Ok(false)
    }
}

/// Runs one knowledge source: control first, then pending work, then one
/// event from its subscription.
pub struct KsTask {
    cx: Arc<AgentContext>,
    ks: Box<dyn KnowledgeSource>,
    sub: Subscription,
    control: Receiver<ControlEvent>,
    waiting: bool,
}

impl KsTask {
    pub fn new(cx: &Arc<AgentContext>, ks: Box<dyn KnowledgeSource>) -> KsTask {
        let sub = cx.bus.subscribe(ks.subscriptions());
        let (tx, control) = unbounded();
        cx.add_control(ks.id(), tx);
        KsTask { cx: Arc::clone(cx), ks, sub, control, waiting: false }
    }

    pub fn id(&self) -> &str {
        self.ks.id()
    }

    fn fault(&self, e: CoreError) {
        self.cx.trace.record(&self.cx.name, "KsFault", Term::atom(format!("{}: {e}", self.ks.id())));
    }
}

impl Task for KsTask {
    fn label(&self) -> String {
        format!("{}/{}", self.cx.name, self.ks.id())
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        if let Ok(c) = self.control.try_recv() {
            match c.kind {
                ControlKind::Kill => return Poll::Done,
                ControlKind::Wait => self.waiting = true,
                ControlKind::Resume => self.waiting = false,
                _ => {
                    if let Err(e) = self.ks.on_control(&c, &self.cx) {
                        self.fault(e);
                    }
                }
            }
            return Poll::Busy;
        }
        if self.waiting {
            return Poll::Idle;
        }
        match self.ks.work(&self.cx) {
            Ok(true) => return Poll::Busy,
            Ok(false) => {}
            Err(e) => {
                self.fault(e);
                return Poll::Busy;
            }
        }
        match self.sub.try_next() {
            Some(e) => {
                if let Err(err) = self.ks.on_event(&e, &self.cx) {
                    self.fault(err);
                }
                Poll::Busy
            }
            None => Poll::Idle,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    /// Ran a step; more remain.
    Continue,
    /// The plan has no steps left and is now done.
    Finished,
    /// The step's skill failed; the plan is invalidated.
    Failed(String),
    /// The plan had been invalidated; nothing ran.
    Invalidated,
}

fn action_payload(p: &PartialPlan, step: Term, status: Term) -> Term {
    Term::compound("action", vec![p.id.to_term(), p.goal.to_term(), step, status])
}

/// Runs the next step of a plan through the kernel and applies its expected
/// effects on success.
pub fn execute_step(cx: &AgentContext, pid: PlanId) -> Result<StepOutcome> {
    let plan = cx.board.plan(pid).ok_or_else(|| CoreError::InvalidatedPlan(pid.to_string()))?;
    match plan.status {
        PlanStatus::Invalidated => return Ok(StepOutcome::Invalidated),
        PlanStatus::Done => return Ok(StepOutcome::Finished),
        PlanStatus::Open | PlanStatus::Executing => {}
    }
    let Some(step) = plan.remaining().first().cloned() else {
        cx.board.update_plan(pid, |p| p.status = PlanStatus::Done);
        cx.bus.emit(EventKind::ActionExecuted, action_payload(&plan, Term::atom("none"), Term::atom("done")));
        return Ok(StepOutcome::Finished);
    };
    cx.board.update_plan(pid, |p| p.status = PlanStatus::Executing);
    match cx.invoke(&step.selector, &step.args) {
        Ok(_) => {
            // advance the cursor first so repairs triggered by the effects
            // only ever see the steps still to come
            let last = cx
                .board
                .update_plan(pid, |p| {
                    p.cursor += 1;
                    let last = p.cursor >= p.steps.len();
                    if last && p.status == PlanStatus::Executing {
                        p.status = PlanStatus::Done;
                    }
                    last
                })
                .unwrap_or(true);
            for e in &step.effects {
                e.apply(cx)?;
            }
            let status = if last { "done" } else { "continuing" };
            cx.bus.emit(EventKind::ActionExecuted, action_payload(&plan, step.action(), Term::atom(status)));
            Ok(if last { StepOutcome::Finished } else { StepOutcome::Continue })
        }
        Err(e) => {
            let reason = match &e {
                CoreError::SkillFailed(r) => r.clone(),
                other => Term::atom(other.to_string()),
            };
            cx.bus.emit(EventKind::ActionFailed, action_payload(&plan, step.action(), Term::compound("failed", vec![reason.clone()])));
            invalidate(cx, pid, "action_failed");
            Ok(StepOutcome::Failed(reason.to_string()))
        }
    }
}

/// Executes a whole open plan synchronously.
pub fn execute(cx: &AgentContext, pid: PlanId) -> Result<StepOutcome> {
    let plan = cx.board.plan(pid).ok_or_else(|| CoreError::InvalidatedPlan(pid.to_string()))?;
    if plan.status == PlanStatus::Invalidated {
        return Err(CoreError::InvalidatedPlan(pid.to_string()));
    }
    loop {
        match execute_step(cx, pid)? {
            StepOutcome::Continue => {}
            other => return Ok(other),
        }
    }
}

/// Takes produced plans in arrival order and runs them a step per poll.
#[derive(Debug, Default)]
pub struct Executor {
    id: String,
    queue: VecDeque<PlanId>,
    current: Option<PlanId>,
}

impl Executor {
    pub fn new(id: &str) -> Self {
        Executor { id: id.to_string(), queue: VecDeque::new(), current: None }
    }
}

impl KnowledgeSource for Executor {
    fn id(&self) -> &str {
        &self.id
    }

    fn subscriptions(&self) -> Vec<EventKind> {
        vec![EventKind::PlanProduced]
    }

    fn on_event(&mut self, e: &InternalEvent, _cx: &AgentContext) -> Result<()> {
        if let Some((Some(pid), _)) = payload_ids(&e.payload) {
            self.queue.push_back(pid);
        }
        Ok(())
    }

    fn on_control(&mut self, c: &ControlEvent, cx: &AgentContext) -> Result<()> {
        match c.kind {
            ControlKind::TakePlan => {
                if let Some(pid) = PlanId::from_term(&c.payload) {
                    self.queue.push_back(pid);
                }
            }
            ControlKind::YieldPlan => {
                if let Some(pid) = self.current.take() {
                    cx.board.update_plan(pid, |p| {
                        if p.status == PlanStatus::Executing {
                            p.status = PlanStatus::Open;
                        }
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn work(&mut self, cx: &AgentContext) -> Result<bool> {
        if self.current.is_none() {
            let Some(pid) = self.queue.pop_front() else { return Ok(false) };
            match cx.board.plan(pid).map(|p| p.status) {
                Some(PlanStatus::Open) => self.current = Some(pid),
                _ => {
                    cx.trace.record(&cx.name, "PlanSkipped", pid.to_term());
                    return Ok(true);
                }
            }
        }
        let pid = self.current.expect("set above");
        match execute_step(cx, pid)? {
            StepOutcome::Continue => {}
            _ => self.current = None,
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Adaptation {
    Unchanged,
    Adapted(PartialPlan),
    Invalidated(String),
}

fn mentions(step_terms: &[Term], fact: &Term) -> bool {
    step_terms.iter().any(|t| unify(t, fact, &Substitution::new()).is_some())
}

/// Default repair: a retracted fact some remaining step requires (and that no
/// longer holds) invalidates the plan; otherwise remaining steps whose
/// effects all hold already are dropped.
pub fn adapt_plan(p: &PartialPlan, change: &Term, ms: &MentalState) -> Adaptation {
    let fact = match (change.functor(), change.args()) {
        (Some("asserted" | "retracted"), [f]) => f,
        _ => return Adaptation::Unchanged,
    };
    let relevant = p
        .remaining()
        .iter()
        .any(|s| mentions(&s.preconditions, fact) || mentions(&s.effects.iter().filter_map(effect_fact).collect::<Vec<_>>(), fact));
    if !relevant {
        return Adaptation::Unchanged;
    }
    let beliefs = ms.module(BELIEFS);
    if change.functor() == Some("retracted") {
        for s in p.remaining() {
            for pre in &s.preconditions {
                let gone = !beliefs.is_some_and(|b| b.contains_match(pre));
                if gone && unify(pre, fact, &Substitution::new()).is_some() {
                    return Adaptation::Invalidated(format!("{pre} no longer holds"));
                }
            }
        }
    }
    let mut repaired = p.clone();
    let head = repaired.steps[..repaired.cursor.min(repaired.steps.len())].to_vec();
    let tail: Vec<_> = p.remaining().iter().filter(|s| s.effects.is_empty() || !s.effects.iter().all(|e| e.holds(ms))).cloned().collect();
    if tail.len() == p.remaining().len() {
        return Adaptation::Unchanged;
    }
    repaired.steps = head.into_iter().chain(tail).collect();
    Adaptation::Adapted(repaired)
}

fn effect_fact(e: &crate::effect::Effect) -> Option<Term> {
    match e {
        crate::effect::Effect::Assert(f) | crate::effect::Effect::Retract(f) => Some(f.clone()),
        crate::effect::Effect::Send { .. } => None,
    }
}

/// Watches belief changes and repairs or invalidates live plans.
#[derive(Debug)]
pub struct PlanAdapter {
    id: String,
}

impl PlanAdapter {
    pub fn new(id: &str) -> Self {
        PlanAdapter { id: id.to_string() }
    }
}

impl KnowledgeSource for PlanAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn subscriptions(&self) -> Vec<EventKind> {
        vec![EventKind::BeliefChanged]
    }

    fn on_event(&mut self, e: &InternalEvent, cx: &AgentContext) -> Result<()> {
        let ms = cx.store.snapshot();
        for plan in cx.board.plans().into_iter().filter(PartialPlan::is_live) {
            match adapt_plan(&plan, &e.payload, &ms) {
                Adaptation::Unchanged => {}
                Adaptation::Adapted(repaired) => {
                    let applied = cx.board.update_plan(plan.id, |p| {
                        // only commit if the executor has not moved on meanwhile
                        if p.cursor == plan.cursor && p.is_live() {
                            p.steps = repaired.steps.clone();
                            true
                        } else {
                            false
                        }
                    });
                    if applied == Some(true) {
                        cx.bus.emit(
                            EventKind::PlanAdapted,
                            Term::compound(
                                "plan",
                                vec![plan.id.to_term(), plan.goal.to_term(), Term::int(repaired.remaining().len() as i64)],
                            ),
                        );
                    }
                }
                Adaptation::Invalidated(_) => invalidate(cx, plan.id, "precondition_retracted"),
            }
        }
        Ok(())
    }
}
