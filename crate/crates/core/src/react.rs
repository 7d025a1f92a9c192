//! Reactors: situation occurrences mapped straight to skills, guarded by a
//! logic precondition.

use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use stormkit_logic::{parse_term, Substitution, Term};

use crate::bus::EventKind;
use crate::effect::Effect;
use crate::error::Result;
use crate::kernel::AgentContext;
use crate::percept::SituationOccurrence;
use crate::sched::{Poll, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub name: String,
    pub situation: String,
    pub precondition: Term,
    pub selector: String,
    /// Argument templates over the situation's and precondition's variables.
    pub args: Vec<Term>,
    /// Applied only when the skill succeeds. `Result` is bound to its value.
    pub effects: Vec<Effect>,
}

impl Reaction {
    pub fn new(name: &str, situation: &str, selector: &str) -> Self {
        Reaction {
            name: name.to_string(),
            situation: situation.to_string(),
            precondition: Term::atom("true"),
            selector: selector.to_string(),
            args: Vec::new(),
            effects: Vec::new(),
        }
    }

    pub fn when(mut self, precondition: &str) -> Self {
        self.precondition = parse_term(precondition).expect("precondition parses");
        self
    }

    pub fn with_args(mut self, args: Vec<Term>) -> Self {
        self.args = args;
        self
    }

    pub fn then(mut self, effect: Effect) -> Self {
        self.effects.push(effect);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReactionOutcome {
    Executed { reaction: String, result: Term },
    Failed { reaction: String, reason: String },
}

#[derive(Clone, Debug, Default)]
pub struct Reactor {
    reactions: Vec<Reaction>,
}

impl Reactor {
    pub fn new(reactions: Vec<Reaction>) -> Self {
        Reactor { reactions }
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Runs, in declaration order, every reaction for this situation whose
    /// precondition holds right now. Returns what was attempted.
    pub fn on_situation(&self, occ: &SituationOccurrence, cx: &AgentContext) -> Vec<ReactionOutcome> {
        let mut out = Vec::new();
        for r in self.reactions.iter().filter(|r| r.situation == occ.name) {
            match self.fire(r, occ, cx) {
                Ok(Some(o)) => out.push(o),
                Ok(None) => {}
                Err(e) => {
                    cx.trace.record(&cx.name, "ReactionError", Term::atom(format!("{}: {e}", r.name)));
                }
            }
        }
        out
    }

    fn fire(&self, r: &Reaction, occ: &SituationOccurrence, cx: &AgentContext) -> Result<Option<ReactionOutcome>> {
        let ms = cx.store.snapshot();
        let guard = occ.bindings.apply(&r.precondition);
        let Some(s) = cx.solve_in(&ms, &guard, None, 1)?.into_iter().next() else {
            return Ok(None);
        };
        let bindings = occ.bindings.merged(&s).unwrap_or_else(|| occ.bindings.clone());
        let args: Vec<Term> = r.args.iter().map(|a| bindings.apply(a)).collect();
        let action = Term::compound(r.selector.as_str(), args.clone());
        match cx.invoke(&r.selector, &args) {
            Ok(result) => {
                let mut b = bindings;
                let _ = b.unify_in_place(&Term::var("Result"), &result);
                for e in &r.effects {
                    e.instantiate(&b).apply(cx)?;
                }
                cx.bus.emit(EventKind::ActionExecuted, Term::compound("reaction", vec![Term::atom(r.name.as_str()), action]));
                Ok(Some(ReactionOutcome::Executed { reaction: r.name.clone(), result }))
            }
            Err(e) => {
                cx.bus.emit(EventKind::ActionFailed, Term::compound("reaction", vec![Term::atom(r.name.as_str()), action]));
                Ok(Some(ReactionOutcome::Failed { reaction: r.name.clone(), reason: e.to_string() }))
            }
        }
    }
}

/// The reactor as a component task with its own occurrence queue.
pub struct ReactorTask {
    cx: Arc<AgentContext>,
    reactor: Reactor,
    rx: Receiver<SituationOccurrence>,
}

impl ReactorTask {
    pub fn new(cx: Arc<AgentContext>, reactor: Reactor) -> (ReactorTask, Sender<SituationOccurrence>) {
        let (tx, rx) = unbounded();
        (ReactorTask { cx, reactor, rx }, tx)
    }
}

impl Task for ReactorTask {
    fn label(&self) -> String {
        format!("{}/reactor", self.cx.name)
    }

    fn poll(&mut self) -> Poll {
        if !self.cx.is_alive() {
            return Poll::Done;
        }
        match self.rx.try_recv() {
            Ok(occ) => {
                self.reactor.on_situation(&occ, &self.cx);
                Poll::Busy
            }
            Err(_) => Poll::Idle,
        }
    }
}

/// Bindings an occurrence was detected under, exposed for replay checks.
pub fn precondition_holds(r: &Reaction, bindings: &Substitution, cx: &AgentContext) -> Result<bool> {
    let ms = cx.store.snapshot();
    Ok(!cx.solve_in(&ms, &bindings.apply(&r.precondition), None, 1)?.is_empty())
}
