//! Clauses, logic modules and the mental state that groups them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::LogicError;
use crate::parse::parse_clauses;
use crate::subst::unify;
use crate::term::Term;
use crate::Substitution;

/// Generation used when testing stored clauses against patterns, so that
/// clause variables never clash with generation-0 pattern variables.
const MATCH_GENERATION: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Term>) -> Result<Clause, LogicError> {
        if !head.is_callable() {
            return Err(LogicError::InvalidClause(format!("head `{head}` is not callable")));
        }
        if let Some(bad) = body.iter().find(|g| matches!(g, Term::Number(_) | Term::Host(_))) {
            return Err(LogicError::InvalidClause(format!("body goal `{bad}` is not callable")));
        }
        Ok(Clause { head, body })
    }

    pub fn fact(head: Term) -> Result<Clause, LogicError> {
        Clause::new(head, Vec::new())
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub(crate) fn renamed(&self, generation: u32) -> Clause {
        Clause { head: self.head.rename(generation), body: self.body.iter().map(|g| g.rename(generation)).collect() }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, g) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{g}")?;
            }
        }
        f.write_str(".")
    }
}

/// Named, ordered clause list. Clause order determines solution order.
/// The clause vector is shared copy-on-write so snapshots are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicModule {
    name: Arc<str>,
    clauses: Arc<Vec<Clause>>,
}

impl LogicModule {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        LogicModule { name: name.into(), clauses: Arc::new(Vec::new()) }
    }

    pub fn from_text(name: impl Into<Arc<str>>, text: &str) -> Result<Self, LogicError> {
        let mut m = LogicModule::new(name);
        m.extend(parse_clauses(text)?);
        Ok(m)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn push(&mut self, clause: Clause) {
        Arc::make_mut(&mut self.clauses).push(clause);
    }

    pub fn extend(&mut self, clauses: impl IntoIterator<Item = Clause>) {
        Arc::make_mut(&mut self.clauses).extend(clauses);
    }

    /// Removes the first clause whose head unifies with `pattern`.
    pub fn retract(&mut self, pattern: &Term) -> Option<Clause> {
        let idx = self.position(pattern)?;
        Some(Arc::make_mut(&mut self.clauses).remove(idx))
    }

    /// Removes every clause whose head unifies with `pattern`.
    pub fn retract_all(&mut self, pattern: &Term) -> usize {
        let before = self.clauses.len();
        if self.position(pattern).is_none() {
            return 0;
        }
        Arc::make_mut(&mut self.clauses).retain(|c| !head_matches(c, pattern));
        before - self.clauses.len()
    }

    fn position(&self, pattern: &Term) -> Option<usize> {
        self.clauses.iter().position(|c| head_matches(c, pattern))
    }

    /// True if some clause head unifies with `pattern`.
    pub fn contains_match(&self, pattern: &Term) -> bool {
        self.position(pattern).is_some()
    }
}

fn head_matches(c: &Clause, pattern: &Term) -> bool {
    unify(&c.head.rename(MATCH_GENERATION), pattern, &Substitution::new()).is_some()
}

pub const BELIEFS: &str = "beliefs";
pub const SITUATIONS: &str = "situations";
pub const GOALS: &str = "goals";

/// An agent's mental state: a set of named logic modules.
#[derive(Clone, Debug, PartialEq)]
pub struct MentalState {
    modules: BTreeMap<String, LogicModule>,
}

impl Default for MentalState {
    fn default() -> Self {
        Self::new()
    }
}

impl MentalState {
    /// Creates the `beliefs`, `situations` and `goals` modules.
    pub fn new() -> Self {
        let mut modules = BTreeMap::new();
        for name in [BELIEFS, SITUATIONS, GOALS] {
            modules.insert(name.to_string(), LogicModule::new(name));
        }
        MentalState { modules }
    }

    pub fn module(&self, name: &str) -> Option<&LogicModule> {
        self.modules.get(name)
    }

    pub fn module_mut(&mut self, name: &str) -> Result<&mut LogicModule, LogicError> {
        self.modules.get_mut(name).ok_or_else(|| LogicError::UnknownModule(name.to_string()))
    }

    pub fn module_names(&self) -> impl Iterator<Item = &str> {
        self.modules.keys().map(String::as_str)
    }

    /// Adds (or replaces) a module.
    pub fn insert_module(&mut self, module: LogicModule) {
        self.modules.insert(module.name().to_string(), module);
    }

    /// Adds an empty module if it is absent.
    pub fn ensure_module(&mut self, name: &str) -> &mut LogicModule {
        self.modules.entry(name.to_string()).or_insert_with(|| LogicModule::new(name))
    }

    pub fn remove_module(&mut self, name: &str) -> Option<LogicModule> {
        self.modules.remove(name)
    }

    /// Appends `clause` to `module`.
    pub fn assert_clause(&mut self, module: &str, clause: Clause) -> Result<(), LogicError> {
        self.module_mut(module)?.push(clause);
        Ok(())
    }

    pub fn assert_fact(&mut self, module: &str, fact: Term) -> Result<(), LogicError> {
        self.assert_clause(module, Clause::fact(fact)?)
    }

    /// Removes the first clause of `module` whose head unifies with
    /// `pattern`; unchanged when nothing matches.
    pub fn retract_clause(&mut self, module: &str, pattern: &Term) -> Result<Option<Clause>, LogicError> {
        Ok(self.module_mut(module)?.retract(pattern))
    }

    pub fn retract_all(&mut self, module: &str, pattern: &Term) -> Result<usize, LogicError> {
        Ok(self.module_mut(module)?.retract_all(pattern))
    }

    /// Parses `text` and appends its clauses to `module`, creating it if needed.
    pub fn load_text(&mut self, module: &str, text: &str) -> Result<usize, LogicError> {
        let clauses = parse_clauses(text)?;
        let n = clauses.len();
        self.ensure_module(module).extend(clauses);
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_clause, parse_term};

    #[test]
    fn retract_first_match_only() {
        let mut ms = MentalState::new();
        ms.load_text(BELIEFS, "location(box(5),2,3). location(box(5),4,4).").unwrap();
        let removed = ms.retract_clause(BELIEFS, &parse_term("location(box(5),_,_)").unwrap()).unwrap();
        assert_eq!(removed.unwrap().head.to_string(), "location(box(5),2,3)");
        let left = ms.module(BELIEFS).unwrap();
        assert_eq!(left.len(), 1);
        assert_eq!(left.clauses()[0].head.to_string(), "location(box(5),4,4)");
    }

    #[test]
    fn retract_on_empty_is_noop() {
        let mut ms = MentalState::new();
        let before = ms.clone();
        assert!(ms.retract_clause(BELIEFS, &parse_term("x").unwrap()).unwrap().is_none());
        assert_eq!(ms, before);
    }

    #[test]
    fn unknown_module() {
        let mut ms = MentalState::new();
        let c = parse_clause("a.").unwrap();
        assert!(matches!(ms.assert_clause("nope", c), Err(LogicError::UnknownModule(_))));
    }

    #[test]
    fn snapshots_are_independent() {
        let mut ms = MentalState::new();
        ms.assert_fact(BELIEFS, Term::atom("a")).unwrap();
        let snap = ms.clone();
        ms.assert_fact(BELIEFS, Term::atom("b")).unwrap();
        assert_eq!(snap.module(BELIEFS).unwrap().len(), 1);
        assert_eq!(ms.module(BELIEFS).unwrap().len(), 2);
    }

    #[test]
    fn clause_display_round_trips() {
        let c = parse_clause("p(X) :- q(X, [a|T]), \\+ r(T).").unwrap();
        let again = parse_clause(&c.to_string()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_variable_head() {
        assert!(Clause::new(Term::var("X"), vec![]).is_err());
        assert!(Clause::new(Term::atom("a"), vec![Term::int(3)]).is_err());
    }
}
