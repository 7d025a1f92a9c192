use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;
use stormkit_logic::{Engine, LogicModule, MentalState, Substitution, Term, BELIEFS, GOALS};

use super::base::BaseObject;
use super::dispatch::{AgentBridge, Dispatcher, ObjectId};
use super::store::MentalStore;
use crate::bus::{ControlEvent, EventBus};
use crate::comms::AclMessage;
use crate::deliberate::GoalBoard;
use crate::error::{CoreError, Result};
use crate::trace::Trace;

/// What every component of one agent shares.
pub struct AgentContext {
    pub name: String,
    pub base: ObjectId,
    pub dispatcher: Arc<Dispatcher>,
    pub store: Arc<MentalStore>,
    pub bus: Arc<EventBus>,
    pub engine: Arc<Engine>,
    pub trace: Trace,
    pub board: GoalBoard,
    outbox: Option<Sender<AclMessage>>,
    alive: AtomicBool,
    controls: Mutex<BTreeMap<String, Sender<ControlEvent>>>,
}

impl std::fmt::Debug for AgentContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentContext").field("name", &self.name).field("base", &self.base).finish_non_exhaustive()
    }
}

pub(crate) struct ContextParts {
    pub name: String,
    pub base: ObjectId,
    pub dispatcher: Arc<Dispatcher>,
    pub state: MentalState,
    pub engine: Arc<Engine>,
    pub trace: Trace,
    pub outbox: Option<Sender<AclMessage>>,
}

impl AgentContext {
    pub(crate) fn new(p: ContextParts) -> Self {
        let bus = Arc::new(EventBus::new(&p.name, Some(p.trace.clone())));
        AgentContext {
            store: Arc::new(MentalStore::new(p.state, Some(Arc::clone(&bus)))),
            board: GoalBoard::default(),
            name: p.name,
            base: p.base,
            dispatcher: p.dispatcher,
            bus,
            engine: p.engine,
            trace: p.trace,
            outbox: p.outbox,
            alive: AtomicBool::new(true),
            controls: Mutex::new(BTreeMap::new()),
        }
    }

    /// A self-contained context around a fresh dispatcher, for driving
    /// components without a runtime. The receiver sees everything sent.
    pub fn standalone(base: BaseObject, state: MentalState) -> (Arc<AgentContext>, Receiver<AclMessage>) {
        let dispatcher = Arc::new(Dispatcher::new());
        let name = base.name().to_string();
        let id = dispatcher.register(base).expect("fresh dispatcher");
        let (tx, rx) = unbounded();
        let cx = AgentContext::new(ContextParts {
            name,
            base: id,
            dispatcher,
            state,
            engine: Arc::new(Engine::default()),
            trace: Trace::default(),
            outbox: Some(tx),
        });
        (Arc::new(cx), rx)
    }

    pub fn is_alive(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }

    pub(crate) fn mark_dead(&self) {
        self.alive.store(false, Ordering::SeqCst);
    }

    /// Invokes one of this agent's own skills through the dispatcher.
    pub fn invoke(&self, selector: &str, args: &[Term]) -> Result<Term> {
        if !self.is_alive() {
            return Err(CoreError::AgentKilled(self.name.clone()));
        }
        self.dispatcher.invoke(self.base, selector, args)
    }

    pub fn bridge(&self) -> AgentBridge<'_> {
        AgentBridge { dispatcher: &self.dispatcher, base: Some(self.base) }
    }

    /// Solves against `ms` (beliefs, goals, then remaining modules by name),
    /// plus `extra` last.
    pub fn solve_in(&self, ms: &MentalState, goal: &Term, extra: Option<&LogicModule>, limit: usize) -> Result<Vec<Substitution>> {
        let mut ms_ref = std::borrow::Cow::Borrowed(ms);
        let mut order = module_order(ms);
        if let Some(m) = extra {
            ms_ref.to_mut().insert_module(m.clone());
            order.push(m.name().to_string());
        }
        let order: Vec<&str> = order.iter().map(String::as_str).collect();
        let bridge = self.bridge();
        let mut out = Vec::new();
        for s in self.engine.solve(goal, &ms_ref, &order, Some(&bridge)) {
            out.push(s?);
            if out.len() >= limit {
                break;
            }
        }
        Ok(out)
    }

    pub fn solve_first(&self, goal: &Term) -> Result<Option<Substitution>> {
        let ms = self.store.snapshot();
        Ok(self.solve_in(&ms, goal, None, 1)?.into_iter().next())
    }

    pub fn holds(&self, goal: &Term) -> Result<bool> {
        Ok(self.solve_first(goal)?.is_some())
    }

    pub fn can_send(&self) -> bool {
        self.outbox.is_some()
    }

    /// Queues a message with the communicator.
    pub fn send(&self, m: AclMessage) -> Result<()> {
        let outbox = self.outbox.as_ref().ok_or(CoreError::MissingComponent { agent: self.name.clone(), component: "communicator" })?;
        outbox.send(m).map_err(|_| CoreError::AgentKilled(self.name.clone()))
    }

    pub(crate) fn add_control(&self, ks: &str, tx: Sender<ControlEvent>) {
        self.controls.lock().insert(ks.to_string(), tx);
    }

    /// Delivers a control event to one knowledge source, or to all with `*`.
    pub fn control(&self, ev: ControlEvent) -> Result<()> {
        let controls = self.controls.lock();
        if ev.target == "*" {
            for tx in controls.values() {
                let _ = tx.send(ev.clone());
            }
            return Ok(());
        }
        let tx = controls.get(&ev.target).ok_or_else(|| CoreError::UnknownTarget(ev.target.clone()))?;
        tx.send(ev).map_err(|_| CoreError::AgentKilled(self.name.clone()))
    }

    pub fn knowledge_sources(&self) -> Vec<String> {
        self.controls.lock().keys().cloned().collect()
    }
}

/// Query order: beliefs, goals, then the other modules by name.
pub fn module_order(ms: &MentalState) -> Vec<String> {
    let mut order = Vec::new();
    for m in [BELIEFS, GOALS] {
        if ms.module(m).is_some() {
            order.push(m.to_string());
        }
    }
    order.extend(ms.module_names().filter(|n| *n != BELIEFS && *n != GOALS).map(str::to_string));
    order
}
