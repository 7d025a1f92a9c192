use std::sync::Arc;

use parking_lot::RwLock;
use stormkit_logic::{Clause, MentalState, Term, BELIEFS};

use crate::bus::{EventBus, EventKind};
use crate::error::Result;

/// An agent's mental state: one writer at a time, readers take snapshots.
/// Changes to `beliefs` are published as `BeliefChanged`.
#[derive(Debug)]
pub struct MentalStore {
    state: RwLock<MentalState>,
    bus: Option<Arc<EventBus>>,
}

impl MentalStore {
    pub fn new(state: MentalState, bus: Option<Arc<EventBus>>) -> Self {
        MentalStore { state: RwLock::new(state), bus }
    }

    /// Copy-on-write clone; cheap.
    pub fn snapshot(&self) -> MentalState {
        self.state.read().clone()
    }

    pub fn read<R>(&self, f: impl FnOnce(&MentalState) -> R) -> R {
        f(&self.state.read())
    }

    fn changed(&self, module: &str, what: &str, fact: &Term) {
        if module != BELIEFS {
            return;
        }
        if let Some(bus) = &self.bus {
            bus.emit(EventKind::BeliefChanged, Term::compound(what, vec![fact.clone()]));
        }
    }

    pub fn assert_fact(&self, module: &str, fact: Term) -> Result<()> {
        self.state.write().assert_fact(module, fact.clone())?;
        self.changed(module, "asserted", &fact);
        Ok(())
    }

    pub fn assert_clause(&self, module: &str, clause: Clause) -> Result<()> {
        let head = clause.head.clone();
        self.state.write().assert_clause(module, clause)?;
        self.changed(module, "asserted", &head);
        Ok(())
    }

    /// Removes the first clause whose head unifies with `pattern`.
    pub fn retract(&self, module: &str, pattern: &Term) -> Result<Option<Clause>> {
        let removed = self.state.write().retract_clause(module, pattern)?;
        if let Some(c) = &removed {
            self.changed(module, "retracted", &c.head);
        }
        Ok(removed)
    }

    pub fn retract_all(&self, module: &str, pattern: &Term) -> Result<Vec<Clause>> {
        let mut out = Vec::new();
        while let Some(c) = self.retract(module, pattern)? {
            out.push(c);
        }
        Ok(out)
    }

    /// Replaces every clause matching `pattern` with `facts`, publishing only
    /// the net difference.
    pub fn replace(&self, module: &str, pattern: &Term, facts: Vec<Term>) -> Result<()> {
        let (removed, added) = {
            let mut ms = self.state.write();
            let m = ms.module_mut(module)?;
            let mut removed = Vec::new();
            while let Some(c) = m.retract(pattern) {
                removed.push(c.head);
            }
            for f in &facts {
                m.push(Clause::fact(f.clone())?);
            }
            let added: Vec<Term> = facts.iter().filter(|f| !removed.contains(f)).cloned().collect();
            let removed: Vec<Term> = removed.into_iter().filter(|r| !facts.contains(r)).collect();
            (removed, added)
        };
        for r in &removed {
            self.changed(module, "retracted", r);
        }
        for a in &added {
            self.changed(module, "asserted", a);
        }
        Ok(())
    }

    pub fn write<R>(&self, f: impl FnOnce(&mut MentalState) -> R) -> R {
        f(&mut self.state.write())
    }
}
