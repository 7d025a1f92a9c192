//! Default responses to query performatives.

use stormkit_logic::{parse_term, Engine, HostBridge, MentalState, Term};

use super::message::{AclMessage, Content, Performative};
use crate::kernel::module_order;

fn query_of(m: &AclMessage) -> Result<Term, Term> {
    match &m.content {
        Content::Term(t) => Ok(t.clone()),
        // text that is still a term, just not canonically printed
        Content::Text(s) => parse_term(s).map_err(|_| Term::compound("error", vec![Term::atom("malformed_content")])),
    }
}

/// Answers an `ask-one`: `tell` with the content under its first solution,
/// otherwise `sorry`. Malformed content and evaluation errors get a
/// `sorry` carrying `error(_)`.
pub fn handle_ask_one(m: &AclMessage, ms: &MentalState, engine: &Engine, bridge: Option<&dyn HostBridge>) -> AclMessage {
    let q = match query_of(m) {
        Ok(q) => q,
        Err(tag) => return m.reply(Performative::Sorry, tag),
    };
    let order = module_order(ms);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    match engine.solve_first(&q, ms, &order, bridge) {
        Ok(Some(s)) => m.reply(Performative::Tell, s.apply(&q)),
        Ok(None) => m.reply(Performative::Sorry, q),
        Err(e) => m.reply(Performative::Sorry, Term::compound("error", vec![Term::atom(e.to_string())])),
    }
}

/// Answers an `ask-all` with a `tell` of the list of all instantiated solutions.
pub fn handle_ask_all(m: &AclMessage, ms: &MentalState, engine: &Engine, bridge: Option<&dyn HostBridge>) -> AclMessage {
    let q = match query_of(m) {
        Ok(q) => q,
        Err(tag) => return m.reply(Performative::Sorry, tag),
    };
    let order = module_order(ms);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    match engine.solve_all(&q, ms, &order, bridge) {
        Ok(sols) if !sols.is_empty() => m.reply(Performative::Tell, Term::list(sols.iter().map(|s| s.apply(&q)))),
        Ok(_) => m.reply(Performative::Sorry, q),
        Err(e) => m.reply(Performative::Sorry, Term::compound("error", vec![Term::atom(e.to_string())])),
    }
}

/// Which performatives get an automatic reply, and in what language/ontology.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerSet {
    pub ask_one: bool,
    pub ask_all: bool,
    /// `None` answers any language.
    pub language: Option<String>,
    pub ontology: Option<String>,
}

impl Default for HandlerSet {
    fn default() -> Self {
        HandlerSet { ask_one: true, ask_all: true, language: None, ontology: None }
    }
}

impl HandlerSet {
    pub fn none() -> Self {
        HandlerSet { ask_one: false, ask_all: false, language: None, ontology: None }
    }

    pub fn respond(&self, m: &AclMessage, ms: &MentalState, engine: &Engine, bridge: Option<&dyn HostBridge>) -> Option<AclMessage> {
        if self.language.as_ref().is_some_and(|l| *l != m.language) || self.ontology.as_ref().is_some_and(|o| *o != m.ontology) {
            return None;
        }
        match m.performative {
            Performative::AskOne if self.ask_one => Some(handle_ask_one(m, ms, engine, bridge)),
            Performative::AskAll if self.ask_all => Some(handle_ask_all(m, ms, engine, bridge)),
            _ => None,
        }
    }
}
