//! Per-agent internal event bus: fan-out by kind, FIFO per subscriber.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;
use stormkit_logic::Term;

use crate::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    GoalCommitted,
    GoalAchieved,
    GoalDropped,
    PerceptionArrived,
    SituationDetected,
    BeliefChanged,
    PlanProduced,
    PlanInvalidated,
    PlanAdapted,
    ActionExecuted,
    ActionFailed,
    MessageReceived,
    MessageSent,
    ConversationAdvanced,
    AgentStarted,
    AgentKilled,
    /// Application-defined kinds beyond the standard vocabulary.
    Custom(&'static str),
}

impl EventKind {
    pub const STANDARD: [EventKind; 16] = [
        EventKind::GoalCommitted,
        EventKind::GoalAchieved,
        EventKind::GoalDropped,
        EventKind::PerceptionArrived,
        EventKind::SituationDetected,
        EventKind::BeliefChanged,
        EventKind::PlanProduced,
        EventKind::PlanInvalidated,
        EventKind::PlanAdapted,
        EventKind::ActionExecuted,
        EventKind::ActionFailed,
        EventKind::MessageReceived,
        EventKind::MessageSent,
        EventKind::ConversationAdvanced,
        EventKind::AgentStarted,
        EventKind::AgentKilled,
    ];

    pub fn name(&self) -> &'static str {
        use EventKind::*;
        match self {
            GoalCommitted => "GoalCommitted",
            GoalAchieved => "GoalAchieved",
            GoalDropped => "GoalDropped",
            PerceptionArrived => "PerceptionArrived",
            SituationDetected => "SituationDetected",
            BeliefChanged => "BeliefChanged",
            PlanProduced => "PlanProduced",
            PlanInvalidated => "PlanInvalidated",
            PlanAdapted => "PlanAdapted",
            ActionExecuted => "ActionExecuted",
            ActionFailed => "ActionFailed",
            MessageReceived => "MessageReceived",
            MessageSent => "MessageSent",
            ConversationAdvanced => "ConversationAdvanced",
            AgentStarted => "AgentStarted",
            AgentKilled => "AgentKilled",
            Custom(name) => name,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InternalEvent {
    pub kind: EventKind,
    pub payload: Term,
}

impl InternalEvent {
    pub fn new(kind: EventKind, payload: Term) -> Self {
        InternalEvent { kind, payload }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlKind {
    Kill,
    Wait,
    Resume,
    AchieveGoal,
    DropGoal,
    TakePlan,
    YieldPlan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlEvent {
    pub kind: ControlKind,
    /// Knowledge-source id, or `*` for all of an agent's sources.
    pub target: String,
    pub payload: Term,
}

struct Subscriber {
    kinds: BTreeSet<EventKind>,
    tx: Sender<InternalEvent>,
}

/// Every published event reaches each subscriber of its kind exactly once.
pub struct EventBus {
    agent: Arc<str>,
    subscribers: Mutex<Vec<Subscriber>>,
    trace: Option<Trace>,
}

impl fmt::Debug for EventBus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventBus").field("agent", &self.agent).finish_non_exhaustive()
    }
}

pub struct Subscription {
    rx: Receiver<InternalEvent>,
}

impl Subscription {
    pub fn try_next(&self) -> Option<InternalEvent> {
        self.rx.try_recv().ok()
    }

    pub fn drain(&self) -> Vec<InternalEvent> {
        self.rx.try_iter().collect()
    }

    pub fn pending(&self) -> usize {
        self.rx.len()
    }
}

impl EventBus {
    pub fn new(agent: &str, trace: Option<Trace>) -> Self {
        EventBus { agent: agent.into(), subscribers: Mutex::new(Vec::new()), trace }
    }

    pub fn agent(&self) -> &str {
        &self.agent
    }

    pub fn subscribe(&self, kinds: impl IntoIterator<Item = EventKind>) -> Subscription {
        let (tx, rx) = unbounded();
        self.subscribers.lock().push(Subscriber { kinds: kinds.into_iter().collect(), tx });
        Subscription { rx }
    }

    pub fn subscribe_all(&self) -> Subscription {
        self.subscribe(EventKind::STANDARD)
    }

    pub fn publish(&self, event: InternalEvent) {
        if let Some(t) = &self.trace {
            t.record(&self.agent, event.kind.name(), &event.payload);
        }
        let mut subs = self.subscribers.lock();
        // dropped subscriptions are pruned lazily
        subs.retain(|s| !s.kinds.contains(&event.kind) || s.tx.send(event.clone()).is_ok());
    }

    pub fn emit(&self, kind: EventKind, payload: Term) {
        self.publish(InternalEvent::new(kind, payload));
    }
}
