//! Perceptors watching skill invocations, and the situation manager that
//! turns what they see (and inbound messages) into situation occurrences.

use std::collections::BTreeSet;
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender, TryRecvError};
use stormkit_logic::{Clause, LogicModule, MentalState, Substitution, Term};

use crate::bus::EventKind;
use crate::comms::AclMessage;
use crate::error::Result;
use crate::kernel::{AgentContext, MessageIntercept, ObjectId, Phase, SelectorFilter, TargetRef, WatchId};
use crate::sched::{Poll, Task};

/// Name of the transient module holding trigger facts during evaluation.
pub const TRIGGER_MODULE: &str = "percept";

#[derive(Clone, Debug, PartialEq)]
pub struct PerceivedEvent {
    pub source: String,
    pub source_id: ObjectId,
    pub selector: String,
    pub args: Vec<Term>,
    pub phase: Phase,
    pub result: Option<Term>,
    pub tick: u64,
}

impl From<MessageIntercept> for PerceivedEvent {
    fn from(m: MessageIntercept) -> Self {
        PerceivedEvent {
            source: m.target_name,
            source_id: m.target,
            selector: m.selector,
            args: m.args,
            phase: m.phase,
            result: m.result,
            tick: m.seq,
        }
    }
}

impl PerceivedEvent {
    /// `perceived(Source, Selector, Args, Phase, Result)`; `none` before the call.
    pub fn to_term(&self) -> Term {
        let phase = match self.phase {
            Phase::Before => "before",
            Phase::After => "after",
        };
        Term::compound(
            "perceived",
            vec![
                Term::atom(self.source.as_str()),
                Term::atom(self.selector.as_str()),
                Term::list(self.args.iter().cloned()),
                Term::atom(phase),
                self.result.clone().unwrap_or_else(|| Term::atom("none")),
            ],
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trigger {
    Event(PerceivedEvent),
    Message(AclMessage),
}

impl Trigger {
    /// The `percept(Selector, Args, Source)` fact visible during evaluation.
    /// For messages the selector is the performative and the args hold the content.
    pub fn fact(&self) -> Term {
        match self {
            Trigger::Event(e) => Term::compound(
                "percept",
                vec![Term::atom(e.selector.as_str()), Term::list(e.args.iter().cloned()), Term::atom(e.source.as_str())],
            ),
            Trigger::Message(m) => Term::compound(
                "percept",
                vec![Term::atom(m.performative.as_str()), Term::list([m.content.to_term()]), Term::atom(m.sender.as_str())],
            ),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Trigger::Event(e) => e.to_term(),
            Trigger::Message(m) => m.to_term(),
        }
    }
}

/// Receives each perceived event. Returning `true` forwards the event to
/// the owner's situation manager.
pub trait PerceptionHandler: Send {
    fn message_perceived(&mut self, e: &PerceivedEvent, cx: &AgentContext) -> Result<bool>;
}

/// Forwards completed invocations only; the before-phase carries no result
/// for situations to look at.
#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardHandler;

impl PerceptionHandler for ForwardHandler {
    fn message_perceived(&mut self, e: &PerceivedEvent, _cx: &AgentContext) -> Result<bool> {
        Ok(e.phase == Phase::After)
    }
}

/// Opt-in belief maintenance: on each completed, successful invocation the
/// closure returns `(pattern, facts)` pairs; matching beliefs are replaced by
/// the facts before the event is forwarded.
pub struct BeliefUpdater<F> {
    update: F,
}

impl<F> BeliefUpdater<F>
where
    F: FnMut(&PerceivedEvent) -> Vec<(Term, Vec<Term>)> + Send,
{
    pub fn new(update: F) -> Self {
        BeliefUpdater { update }
    }
}

impl<F> PerceptionHandler for BeliefUpdater<F>
where
    F: FnMut(&PerceivedEvent) -> Vec<(Term, Vec<Term>)> + Send,
{
    fn message_perceived(&mut self, e: &PerceivedEvent, cx: &AgentContext) -> Result<bool> {
        if e.phase != Phase::After || e.result.as_ref().is_some_and(|r| r.indicator() == Some(("failed", 1))) {
            return Ok(e.phase == Phase::After);
        }
        for (pattern, facts) in (self.update)(e) {
            cx.store.replace(stormkit_logic::BELIEFS, &pattern, facts)?;
        }
        Ok(true)
    }
}

pub struct Perceptor {
    pub id: WatchId,
    pub target: ObjectId,
    cx: Arc<AgentContext>,
    rx: Receiver<MessageIntercept>,
    handler: Box<dyn PerceptionHandler>,
    situations: Option<Sender<Trigger>>,
    last_tick: u64,
}

/// Attaches a perceptor for `cx`'s agent to `target`.
pub fn register_perceptor(
    cx: &Arc<AgentContext>,
    target: TargetRef<'_>,
    filter: SelectorFilter,
    handler: Box<dyn PerceptionHandler>,
    situations: Option<Sender<Trigger>>,
) -> Result<Perceptor> {
    let id_target = match &target {
        TargetRef::Id(id) => Some(*id),
        TargetRef::Name(n) => cx.dispatcher.resolve(TargetRef::Name(n)),
    };
    let (id, rx) = cx.dispatcher.watch(target, &cx.name, filter)?;
    Ok(Perceptor { id, target: id_target.expect("watch succeeded"), cx: Arc::clone(cx), rx, handler, situations, last_tick: 0 })
}

impl Perceptor {
    /// Takes one intercepted invocation, if any, through the handler.
    pub fn step(&mut self) -> Option<PerceivedEvent> {
        let m = match self.rx.try_recv() {
            Ok(m) => m,
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => return None,
        };
        let e = PerceivedEvent::from(m);
        debug_assert!(e.tick > self.last_tick);
        self.last_tick = e.tick;
        self.cx.bus.emit(EventKind::PerceptionArrived, e.to_term());
        match self.handler.message_perceived(&e, &self.cx) {
            Ok(true) => {
                if let Some(sm) = &self.situations {
                    let _ = sm.send(Trigger::Event(e.clone()));
                }
            }
            Ok(false) => {}
            Err(err) => self.cx.trace.record(&self.cx.name, "PerceptorFault", Term::atom(err.to_string())),
        }
        Some(e)
    }

    pub fn pending(&self) -> usize {
        self.rx.len()
    }
}

impl Task for Perceptor {
    fn label(&self) -> String {
        format!("{}/perceptor#{}", self.cx.name, self.id.0)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            self.cx.dispatcher.unwatch(self.id);
            return Poll::Done;
        }
        match self.step() {
            Some(_) => Poll::Busy,
            None => Poll::Idle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SituationDefinition {
    pub name: String,
    /// Variable names of the situation's parameters, from its first clause.
    pub params: Vec<String>,
    pub module: String,
}

impl SituationDefinition {
    /// Collects the situations defined in a module, in first-clause order.
    pub fn from_module(m: &LogicModule) -> Vec<SituationDefinition> {
        let mut out: Vec<SituationDefinition> = Vec::new();
        for c in m.clauses() {
            let Some(def) = Self::from_clause(c, m.name()) else { continue };
            if !out.iter().any(|d| d.name == def.name && d.params.len() == def.params.len()) {
                out.push(def);
            }
        }
        out
    }

    fn from_clause(c: &Clause, module: &str) -> Option<SituationDefinition> {
        if c.head.functor() != Some("situation") {
            return None;
        }
        let args = c.head.args();
        let name = args.first()?.as_atom()?.to_string();
        let params = args[1..]
            .iter()
            .enumerate()
            .map(|(i, a)| match a {
                Term::Var(v) if !v.name.starts_with('_') => v.name.to_string(),
                _ => format!("P{}", i + 1),
            })
            .collect::<Vec<_>>();
        // repeated variables in the head would alias two parameters
        let distinct: BTreeSet<_> = params.iter().collect();
        let params = if distinct.len() == params.len() { params } else { (1..=params.len()).map(|i| format!("P{i}")).collect() };
        Some(SituationDefinition { name, params, module: module.to_string() })
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// `situation(Name, P1, ..., Pn)`.
    pub fn query(&self) -> Term {
        let mut args = vec![Term::atom(self.name.as_str())];
        args.extend(self.params.iter().map(|p| Term::var(p.as_str())));
        Term::compound("situation", args)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SituationOccurrence {
    pub name: String,
    pub args: Vec<Term>,
    pub bindings: Substitution,
    pub trigger: Trigger,
    pub tick: u64,
}

impl SituationOccurrence {
    pub fn to_term(&self) -> Term {
        let mut args = vec![Term::atom(self.name.as_str())];
        args.extend(self.args.iter().cloned());
        Term::compound("situation", args)
    }
}

/// Evaluates every definition against `ms` plus the trigger fact. Returns the
/// occurrences (one per distinct solution, in definition then solution
/// order) and any diagnostics from failed evaluations.
pub fn evaluate_situations(
    defs: &[SituationDefinition],
    ms: &MentalState,
    trigger: &Trigger,
    cx: &AgentContext,
) -> (Vec<SituationOccurrence>, Vec<String>) {
    let mut transient = LogicModule::new(TRIGGER_MODULE);
    transient.push(Clause::fact(trigger.fact()).expect("trigger fact is callable"));
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let tick = cx.trace.clock().now();
    for def in defs {
        let q = def.query();
        match cx.solve_in(ms, &q, Some(&transient), usize::MAX) {
            Ok(solutions) => {
                let mut seen = BTreeSet::new();
                for s in solutions {
                    let args: Vec<Term> = def.params.iter().map(|p| s.apply(&Term::var(p.as_str()))).collect();
                    if !seen.insert(args.clone()) {
                        continue;
                    }
                    out.push(SituationOccurrence { name: def.name.clone(), args, bindings: s, trigger: trigger.clone(), tick });
                }
            }
            Err(e) => diagnostics.push(format!("{}: {e}", def.name)),
        }
    }
    (out, diagnostics)
}

/// Detects situations when a trigger arrives and hands occurrences on.
pub struct SituationManager {
    cx: Arc<AgentContext>,
    defs: Vec<SituationDefinition>,
    rx: Receiver<Trigger>,
    outputs: Vec<Sender<SituationOccurrence>>,
}

impl SituationManager {
    pub fn new(cx: Arc<AgentContext>, defs: Vec<SituationDefinition>) -> (SituationManager, Sender<Trigger>) {
        let (tx, rx) = unbounded();
        (SituationManager { cx, defs, rx, outputs: Vec::new() }, tx)
    }

    pub fn definitions(&self) -> &[SituationDefinition] {
        &self.defs
    }

    pub fn connect(&mut self, out: Sender<SituationOccurrence>) {
        self.outputs.push(out);
    }

    pub fn step(&mut self) -> Option<Vec<SituationOccurrence>> {
        let trigger = self.rx.try_recv().ok()?;
        let snapshot = self.cx.store.snapshot();
        let (occurrences, diagnostics) = evaluate_situations(&self.defs, &snapshot, &trigger, &self.cx);
        for d in diagnostics {
            self.cx.trace.record(&self.cx.name, "SituationError", Term::atom(d));
        }
        for occ in &occurrences {
            self.cx.bus.emit(EventKind::SituationDetected, occ.to_term());
            for out in &self.outputs {
                let _ = out.send(occ.clone());
            }
        }
        Some(occurrences)
    }
}

impl Task for SituationManager {
    fn label(&self) -> String {
        format!("{}/situations", self.cx.name)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        match self.step() {
            Some(_) => Poll::Busy,
            None => Poll::Idle,
        }
    }
}
