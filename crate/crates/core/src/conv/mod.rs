//! Conversation classes: finite automata whose transitions are guarded
//! rules with before/after hooks and an outgoing message.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;
use stormkit_logic::{parse_term, Clause, LogicModule, MentalState, Substitution, Term, Var};

use crate::bus::EventKind;
use crate::comms::{AclMessage, Performative};
use crate::error::{CoreError, Result};
use crate::kernel::AgentContext;
use crate::sched::{Poll, Task};

/// Module holding `event/1`, `peer/1` and `self/1` while a guard query runs.
pub const CONVERSATION_MODULE: &str = "conversation";

#[derive(Clone, Debug, PartialEq)]
pub enum ConvEvent {
    Start,
    Message(AclMessage),
    /// Anything else the agent or a harness injects.
    Signal(Term),
}

impl ConvEvent {
    /// `start`, `message(Performative, Sender, Content)` or `signal(T)`.
    pub fn to_term(&self) -> Term {
        match self {
            ConvEvent::Start => Term::atom("start"),
            ConvEvent::Message(m) => {
                Term::compound("message", vec![Term::atom(m.performative.as_str()), Term::atom(m.sender.as_str()), m.content.to_term()])
            }
            ConvEvent::Signal(t) => Term::compound("signal", vec![t.clone()]),
        }
    }
}

pub struct GuardCtx<'a> {
    pub cx: &'a AgentContext,
    pub instance: &'a ConversationInstance,
    pub event: &'a ConvEvent,
    pub state: &'a MentalState,
}

pub type GuardFn = Arc<dyn Fn(&GuardCtx<'_>) -> Result<Option<Substitution>> + Send + Sync>;
pub type HookFn = Arc<dyn Fn(&mut HookCtx<'_>) -> Result<()> + Send + Sync>;

#[derive(Clone)]
pub enum Guard {
    Always,
    /// Holds when the query (instance bindings applied) has a solution; its
    /// bindings become the transition's locals.
    Query(Term),
    Custom(GuardFn),
}

impl std::fmt::Debug for Guard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Guard::Always => f.write_str("Always"),
            Guard::Query(q) => write!(f, "Query({q})"),
            Guard::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Clone, Debug)]
enum Staged {
    Assert(String, Term),
    Retract(String, Term),
}

/// What a hook may touch. Belief changes are staged and only reach the
/// store if the whole transition completes.
pub struct HookCtx<'a> {
    pub cx: &'a AgentContext,
    pub instance: &'a ConversationInstance,
    pub event: &'a ConvEvent,
    locals: BTreeMap<String, Term>,
    persistent: BTreeMap<String, Term>,
    view: MentalState,
    staged: Vec<Staged>,
}

impl HookCtx<'_> {
    /// Mental state as this transition would leave it so far.
    pub fn view(&self) -> &MentalState {
        &self.view
    }

    pub fn local(&self, name: &str) -> Option<&Term> {
        self.locals.get(name).or_else(|| self.persistent.get(name))
    }

    /// Binds a variable for the rest of this transition (hooks and message).
    pub fn bind(&mut self, name: &str, value: Term) {
        self.locals.insert(name.to_string(), value);
    }

    /// Sets an instance binding that outlives the transition.
    pub fn set(&mut self, name: &str, value: Term) {
        self.persistent.insert(name.to_string(), value);
    }

    pub fn assert(&mut self, module: &str, fact: Term) -> Result<()> {
        self.view.assert_fact(module, fact.clone())?;
        self.staged.push(Staged::Assert(module.to_string(), fact));
        Ok(())
    }

    pub fn retract(&mut self, module: &str, pattern: Term) -> Result<bool> {
        let hit = self.view.retract_clause(module, &pattern)?.is_some();
        if hit {
            self.staged.push(Staged::Retract(module.to_string(), pattern));
        }
        Ok(hit)
    }

    /// Solves against the staged view.
    pub fn solve_first(&self, goal: &Term) -> Result<Option<Substitution>> {
        Ok(self.cx.solve_in(&self.view, &self.subst().apply(goal), None, 1)?.into_iter().next())
    }

    fn subst(&self) -> Substitution {
        to_subst(&self.persistent, &self.locals)
    }
}

fn to_subst(persistent: &BTreeMap<String, Term>, locals: &BTreeMap<String, Term>) -> Substitution {
    let mut all = persistent.clone();
    all.extend(locals.iter().map(|(k, v)| (k.clone(), v.clone())));
    all.into_iter().map(|(k, v)| (Var::new(k), v)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Recipients {
    /// Every peer of the instance.
    Peers,
    /// A name or list of names, after bindings are applied; `[]` sends nothing.
    Term(Term),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessageTemplate {
    pub performative: Performative,
    pub to: Recipients,
    pub content: Term,
}

impl MessageTemplate {
    pub fn new(performative: Performative, to: Recipients, content: &str) -> Self {
        MessageTemplate { performative, to, content: parse_term(content).expect("template parses") }
    }
}

#[derive(Clone)]
pub struct ConvRule {
    pub name: String,
    pub from: String,
    pub to: String,
    pub guard: Guard,
    pub do_before: Option<HookFn>,
    pub do_after: Option<HookFn>,
    pub message: Option<MessageTemplate>,
}

impl std::fmt::Debug for ConvRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvRule")
            .field("name", &self.name)
            .field("from", &self.from)
            .field("to", &self.to)
            .field("guard", &self.guard)
            .field("message", &self.message)
            .finish_non_exhaustive()
    }
}

impl ConvRule {
    pub fn new(name: &str, from: &str, to: &str) -> Self {
        ConvRule {
            name: name.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            guard: Guard::Always,
            do_before: None,
            do_after: None,
            message: None,
        }
    }

    pub fn such_that(mut self, query: &str) -> Self {
        self.guard = Guard::Query(parse_term(query).expect("guard parses"));
        self
    }

    pub fn guard_fn<F>(mut self, f: F) -> Self
    where
        F: Fn(&GuardCtx<'_>) -> Result<Option<Substitution>> + Send + Sync + 'static,
    {
        self.guard = Guard::Custom(Arc::new(f));
        self
    }

    pub fn before<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut HookCtx<'_>) -> Result<()> + Send + Sync + 'static,
    {
        self.do_before = Some(Arc::new(f));
        self
    }

    pub fn after<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut HookCtx<'_>) -> Result<()> + Send + Sync + 'static,
    {
        self.do_after = Some(Arc::new(f));
        self
    }

    pub fn send(mut self, template: MessageTemplate) -> Self {
        self.message = Some(template);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ConversationClass {
    pub name: String,
    pub states: BTreeSet<String>,
    pub initial: String,
    pub finals: BTreeSet<String>,
    pub rules: Vec<ConvRule>,
}

impl ConversationClass {
    pub fn new(name: &str, states: &[&str], initial: &str, finals: &[&str], rules: Vec<ConvRule>) -> Result<Self> {
        let c = ConversationClass {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            initial: initial.to_string(),
            finals: finals.iter().map(|s| s.to_string()).collect(),
            rules,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(CoreError::InvalidConversation(format!("{}: {what}", self.name)));
        if !self.states.contains(&self.initial) {
            return bad(format!("initial state {} is not a state", self.initial));
        }
        if let Some(f) = self.finals.iter().find(|f| !self.states.contains(*f)) {
            return bad(format!("final state {f} is not a state"));
        }
        for r in &self.rules {
            if !self.states.contains(&r.from) || !self.states.contains(&r.to) {
                return bad(format!("rule {} joins unknown states", r.name));
            }
        }
        Ok(())
    }

    pub fn rule(&self, name: &str) -> Option<&ConvRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn is_final(&self, state: &str) -> bool {
        self.finals.contains(state)
    }

    /// Spawns an instance at the initial state.
    pub fn instantiate(&self, id: &str, peers: Vec<String>) -> ConversationInstance {
        ConversationInstance {
            id: id.to_string(),
            class: self.name.clone(),
            current: self.initial.clone(),
            peers,
            bindings: BTreeMap::new(),
            history: Vec::new(),
            ignored: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub rule: String,
    pub from: String,
    pub to: String,
    pub event: Term,
    pub sent: Vec<AclMessage>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConversationInstance {
    pub id: String,
    pub class: String,
    pub current: String,
    pub peers: Vec<String>,
    pub bindings: BTreeMap<String, Term>,
    pub history: Vec<Transition>,
    /// Events that matched no rule.
    pub ignored: Vec<Term>,
}

impl ConversationInstance {
    pub fn binding(&self, name: &str) -> Option<&Term> {
        self.bindings.get(name)
    }

    pub fn substitution(&self) -> Substitution {
        to_subst(&self.bindings, &BTreeMap::new())
    }
}

fn context_module(inst: &ConversationInstance, ev: &ConvEvent, me: &str) -> LogicModule {
    let mut m = LogicModule::new(CONVERSATION_MODULE);
    let fact = |t: Term| Clause::fact(t).expect("callable");
    m.push(fact(Term::compound("event", vec![ev.to_term()])));
    m.push(fact(Term::compound("self", vec![Term::atom(me)])));
    for p in &inst.peers {
        m.push(fact(Term::compound("peer", vec![Term::atom(p.as_str())])));
    }
    m
}

fn evaluate_guard(
    rule: &ConvRule,
    inst: &ConversationInstance,
    ev: &ConvEvent,
    cx: &AgentContext,
    state: &MentalState,
) -> Result<Option<BTreeMap<String, Term>>> {
    let solution = match &rule.guard {
        Guard::Always => Some(Substitution::new()),
        Guard::Query(q) => {
            let q = inst.substitution().apply(q);
            let extra = context_module(inst, ev, &cx.name);
            cx.solve_in(state, &q, Some(&extra), 1)?.into_iter().next()
        }
        Guard::Custom(f) => f(&GuardCtx { cx, instance: inst, event: ev, state })?,
    };
    Ok(solution
        .map(|s| s.iter().filter(|(v, _)| v.generation == 0).map(|(v, _)| (v.name.to_string(), s.apply(&Term::Var(v.clone())))).collect()))
}

fn recipients(template: &MessageTemplate, inst: &ConversationInstance, s: &Substitution) -> Result<Vec<String>> {
    match &template.to {
        Recipients::Peers => Ok(inst.peers.clone()),
        Recipients::Term(t) => {
            let t = s.apply(t);
            let names = match t.as_list() {
                Some(items) => items,
                None => vec![t.clone()],
            };
            names
                .iter()
                .map(|n| n.as_atom().map(str::to_string).ok_or_else(|| CoreError::HookFault(format!("recipient {n} is not a name"))))
                .collect()
        }
    }
}

/// The rule-check template: guard, then `do_before`, then the message is
/// built, then `do_after`; only when all of that succeeds are belief changes
/// committed, messages sent, and the state advanced. A fault leaves the
/// instance and beliefs untouched.
pub fn check(rule: &ConvRule, inst: &mut ConversationInstance, ev: &ConvEvent, cx: &AgentContext) -> Result<Option<Transition>> {
    if inst.current != rule.from {
        return Ok(None);
    }
    let state = cx.store.snapshot();
    let Some(locals) = evaluate_guard(rule, inst, ev, cx, &state)? else { return Ok(None) };
    let mut h = HookCtx { cx, instance: inst, event: ev, locals, persistent: inst.bindings.clone(), view: state, staged: Vec::new() };
    if let Some(f) = &rule.do_before {
        f(&mut h).map_err(|e| CoreError::HookFault(format!("{}.do_before: {e}", rule.name)))?;
    }
    let mut outgoing = Vec::new();
    if let Some(t) = &rule.message {
        let s = h.subst();
        let content = s.apply(&t.content);
        for to in recipients(t, inst, &s)? {
            outgoing.push(AclMessage::new(t.performative.clone(), &cx.name, &to, content.clone()));
        }
    }
    if let Some(f) = &rule.do_after {
        f(&mut h).map_err(|e| CoreError::HookFault(format!("{}.do_after: {e}", rule.name)))?;
    }
    let HookCtx { persistent, staged, .. } = h;
    if !outgoing.is_empty() && !cx.can_send() {
        return Err(CoreError::MissingComponent { agent: cx.name.clone(), component: "communicator" });
    }
    for op in staged {
        match op {
            Staged::Assert(m, f) => cx.store.assert_fact(&m, f)?,
            Staged::Retract(m, p) => {
                cx.store.retract(&m, &p)?;
            }
        }
    }
    for m in &outgoing {
        cx.send(m.clone())?;
    }
    let t = Transition { rule: rule.name.clone(), from: rule.from.clone(), to: rule.to.clone(), event: ev.to_term(), sent: outgoing };
    inst.bindings = persistent;
    inst.current = rule.to.clone();
    inst.history.push(t.clone());
    Ok(Some(t))
}

/// Feeds one event to an instance: the first rule out of the current state
/// whose guard holds fires. Final states, and events no rule accepts, leave
/// the instance as it was apart from the ignored-event log.
pub fn advance(
    class: &ConversationClass,
    inst: &mut ConversationInstance,
    ev: &ConvEvent,
    cx: &AgentContext,
) -> Result<Option<Transition>> {
    if !class.is_final(&inst.current) {
        let current = inst.current.clone();
        for rule in class.rules.iter().filter(|r| r.from == current) {
            match check(rule, inst, ev, cx) {
                Ok(Some(t)) => {
                    cx.bus.emit(
                        EventKind::ConversationAdvanced,
                        Term::compound(
                            "advanced",
                            vec![
                                Term::atom(inst.id.as_str()),
                                Term::atom(t.rule.as_str()),
                                Term::atom(t.from.as_str()),
                                Term::atom(t.to.as_str()),
                            ],
                        ),
                    );
                    return Ok(Some(t));
                }
                Ok(None) => {}
                Err(e) => {
                    cx.trace.record(&cx.name, "ConvFault", Term::atom(e.to_string()));
                    return Err(e);
                }
            }
        }
    }
    inst.ignored.push(ev.to_term());
    cx.trace.record(&cx.name, "ConvIgnored", Term::compound("ignored", vec![Term::atom(inst.id.as_str()), ev.to_term()]));
    Ok(None)
}

/// Walks a transition log from the initial state, checking it is connected,
/// and returns the state it ends in.
pub fn replay(class: &ConversationClass, history: &[Transition]) -> Result<String> {
    let mut state = class.initial.clone();
    for t in history {
        let rule = class.rule(&t.rule).ok_or_else(|| CoreError::InvalidConversation(format!("unknown rule {}", t.rule)))?;
        if rule.from != state || t.from != state || rule.to != t.to {
            return Err(CoreError::InvalidConversation(format!("{} does not apply in {state}", t.rule)));
        }
        state = rule.to.clone();
    }
    Ok(state)
}

#[derive(Clone, Debug)]
pub enum ConvInput {
    Spawn {
        id: String,
        class: String,
        peers: Vec<String>,
    },
    Message(AclMessage),
    /// A signal for one instance, or all of them when `instance` is `None`.
    Signal {
        instance: Option<String>,
        term: Term,
    },
}

/// A message concerns an instance when it comes from one of its peers, or
/// is the router bouncing a message that was addressed to one.
fn concerns(inst: &ConversationInstance, m: &AclMessage) -> bool {
    if inst.peers.contains(&m.sender) {
        return true;
    }
    m.sender == crate::comms::ROUTER_NAME
        && m.content.as_term().is_some_and(|t| {
            t.indicator() == Some(("unknown_receiver", 1)) && t.args()[0].as_atom().is_some_and(|p| inst.peers.iter().any(|q| q == p))
        })
}

pub type SharedInstances = Arc<Mutex<BTreeMap<String, ConversationInstance>>>;

/// Runs an agent's conversations; one input per poll.
pub struct ConversationEngine {
    cx: Arc<AgentContext>,
    classes: BTreeMap<String, Arc<ConversationClass>>,
    instances: SharedInstances,
    rx: Receiver<ConvInput>,
}

impl ConversationEngine {
    pub fn new(cx: Arc<AgentContext>, classes: Vec<Arc<ConversationClass>>) -> (ConversationEngine, Sender<ConvInput>, SharedInstances) {
        let (tx, rx) = unbounded();
        let instances = SharedInstances::default();
        let classes = classes.into_iter().map(|c| (c.name.clone(), c)).collect();
        (ConversationEngine { cx, classes, instances: Arc::clone(&instances), rx }, tx, instances)
    }

    fn feed(&self, id: &str, ev: &ConvEvent) {
        let mut all = self.instances.lock();
        let Some(inst) = all.get_mut(id) else { return };
        let Some(class) = self.classes.get(&inst.class) else { return };
        // faults are traced by advance and leave the instance unchanged
        let _ = advance(class, inst, ev, &self.cx);
    }

    pub fn handle(&mut self, input: ConvInput) {
        match input {
            ConvInput::Spawn { id, class, peers } => {
                let Some(c) = self.classes.get(&class) else {
                    self.cx.trace.record(&self.cx.name, "ConvFault", Term::atom(format!("unknown class {class}")));
                    return;
                };
                let inst = c.instantiate(&id, peers);
                self.instances.lock().insert(id.clone(), inst);
                self.feed(&id, &ConvEvent::Start);
            }
            ConvInput::Message(m) => {
                let targets: Vec<String> = self.instances.lock().values().filter(|i| concerns(i, &m)).map(|i| i.id.clone()).collect();
                let ev = ConvEvent::Message(m);
                for id in targets {
                    self.feed(&id, &ev);
                }
            }
            ConvInput::Signal { instance, term } => {
                let targets: Vec<String> = match instance {
                    Some(id) => vec![id],
                    None => self.instances.lock().keys().cloned().collect(),
                };
                let ev = ConvEvent::Signal(term);
                for id in targets {
                    self.feed(&id, &ev);
                }
            }
        }
    }
}

impl Task for ConversationEngine {
    fn label(&self) -> String {
        format!("{}/conversations", self.cx.name)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        match self.rx.try_recv() {
            Ok(input) => {
                self.handle(input);
                Poll::Busy
            }
            Err(_) => Poll::Idle,
        }
    }
}
