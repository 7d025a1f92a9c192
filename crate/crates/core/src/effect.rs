//! Assert/retract/send templates shared by reactions, plan steps and
//! conversation hooks.

use std::fmt;

use stormkit_logic::{parse_term, unify, MentalState, Substitution, Term, BELIEFS};

use crate::comms::{AclMessage, Performative};
use crate::error::{CoreError, Result};
use crate::kernel::AgentContext;

#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Assert(Term),
    /// Removes every belief matching the pattern.
    Retract(Term),
    Send {
        performative: Performative,
        receiver: Term,
        content: Term,
    },
}

impl Effect {
    pub fn assert(src: &str) -> Effect {
        Effect::Assert(parse_term(src).expect("effect template parses"))
    }

    pub fn retract(src: &str) -> Effect {
        Effect::Retract(parse_term(src).expect("effect template parses"))
    }

    /// Reads `assert(F)`, `retract(F)` or `send(Performative, To, Content)`.
    pub fn from_term(t: &Term) -> Result<Effect> {
        match (t.functor(), t.args()) {
            (Some("assert"), [f]) => Ok(Effect::Assert(f.clone())),
            (Some("retract"), [f]) => Ok(Effect::Retract(f.clone())),
            (Some("send"), [p, to, c]) => {
                let p = p.as_atom().ok_or_else(|| CoreError::InvalidSpec(format!("performative in {t}")))?;
                Ok(Effect::Send { performative: Performative::parse(p), receiver: to.clone(), content: c.clone() })
            }
            _ => Err(CoreError::InvalidSpec(format!("not an effect: {t}"))),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Effect::Assert(f) => Term::compound("assert", vec![f.clone()]),
            Effect::Retract(f) => Term::compound("retract", vec![f.clone()]),
            Effect::Send { performative, receiver, content } => {
                Term::compound("send", vec![Term::atom(performative.as_str()), receiver.clone(), content.clone()])
            }
        }
    }

    pub fn instantiate(&self, s: &Substitution) -> Effect {
        match self {
            Effect::Assert(f) => Effect::Assert(s.apply(f)),
            Effect::Retract(f) => Effect::Retract(s.apply(f)),
            Effect::Send { performative, receiver, content } => {
                Effect::Send { performative: performative.clone(), receiver: s.apply(receiver), content: s.apply(content) }
            }
        }
    }

    /// Whether the effect is already true of the beliefs in `ms`. Sends never are.
    pub fn holds(&self, ms: &MentalState) -> bool {
        let Some(beliefs) = ms.module(BELIEFS) else { return false };
        match self {
            Effect::Assert(f) => beliefs.clauses().iter().any(|c| c.is_fact() && &c.head == f),
            Effect::Retract(p) => !beliefs.contains_match(p),
            Effect::Send { .. } => false,
        }
    }

    pub fn apply(&self, cx: &AgentContext) -> Result<()> {
        match self {
            Effect::Assert(f) => cx.store.assert_fact(BELIEFS, f.clone()),
            Effect::Retract(p) => cx.store.retract_all(BELIEFS, p).map(|_| ()),
            Effect::Send { performative, receiver, content } => {
                let to = receiver.as_atom().ok_or_else(|| CoreError::InvalidSpec(format!("receiver {receiver} is not a name")))?;
                cx.send(AclMessage::new(performative.clone(), &cx.name, to, content.clone()))
            }
        }
    }

    /// Applies the effect to a plain fact set (planner states).
    pub fn apply_to_facts(&self, facts: &mut Vec<Term>) {
        match self {
            Effect::Assert(f) => {
                if !facts.contains(f) {
                    facts.push(f.clone());
                }
            }
            Effect::Retract(p) => facts.retain(|f| unify(f, p, &Substitution::new()).is_none()),
            Effect::Send { .. } => {}
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

pub fn apply_all(effects: &[Effect], s: &Substitution, cx: &AgentContext) -> Result<()> {
    for e in effects {
        e.instantiate(s).apply(cx)?;
    }
    Ok(())
}
