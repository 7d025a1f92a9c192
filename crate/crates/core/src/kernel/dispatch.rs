//! The skill-dispatch point. Every invocation on a registered object passes
//! through here, and watchers see it before and after it runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::RwLock;
use stormkit_logic::{HostBridge, HostValue, LogicError, Term};

use super::base::BaseObject;
use crate::error::{CoreError, Result};

type WatcherTap = (SelectorFilter, Sender<MessageIntercept>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WatchId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Before,
    After,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessageIntercept {
    pub target: ObjectId,
    pub target_name: String,
    pub selector: String,
    pub args: Vec<Term>,
    pub phase: Phase,
    /// Present only after the call; a failed call carries `failed(Reason)`.
    pub result: Option<Term>,
    /// Dispatcher-wide sequence number, strictly increasing.
    pub seq: u64,
}

impl MessageIntercept {
    pub fn failed(&self) -> bool {
        matches!(&self.result, Some(t) if t.indicator() == Some(("failed", 1)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectorFilter {
    Any,
    Only(BTreeSet<String>),
}

impl SelectorFilter {
    pub fn only<I, S>(selectors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SelectorFilter::Only(selectors.into_iter().map(Into::into).collect())
    }

    pub fn matches(&self, selector: &str) -> bool {
        match self {
            SelectorFilter::Any => true,
            SelectorFilter::Only(set) => set.contains(selector),
        }
    }
}

struct Watcher {
    id: WatchId,
    owner: String,
    filter: SelectorFilter,
    tx: Sender<MessageIntercept>,
}

struct Holder {
    base: Arc<BaseObject>,
    watchers: Vec<Watcher>,
}

#[derive(Default)]
struct Table {
    objects: BTreeMap<ObjectId, Holder>,
    names: BTreeMap<String, ObjectId>,
    next_object: u64,
    next_watch: u64,
}

#[derive(Default)]
pub struct Dispatcher {
    table: RwLock<Table>,
    seq: AtomicU64,
}

impl fmt::Debug for Dispatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.table.read();
        f.debug_struct("Dispatcher").field("objects", &t.names).finish()
    }
}

/// Target of a lookup: a handle or a registered name.
pub enum TargetRef<'a> {
    Id(ObjectId),
    Name(&'a str),
}

impl<'a> From<&'a str> for TargetRef<'a> {
    fn from(s: &'a str) -> Self {
        TargetRef::Name(s)
    }
}

impl From<ObjectId> for TargetRef<'_> {
    fn from(id: ObjectId) -> Self {
        TargetRef::Id(id)
    }
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, base: BaseObject) -> Result<ObjectId> {
        let mut t = self.table.write();
        if t.names.contains_key(base.name()) {
            return Err(CoreError::DuplicateAgentName(base.name().to_string()));
        }
        t.next_object += 1;
        let id = ObjectId(t.next_object);
        t.names.insert(base.name().to_string(), id);
        t.objects.insert(id, Holder { base: Arc::new(base), watchers: Vec::new() });
        Ok(id)
    }

    /// Removes an object and its watchers; only used to undo a failed assembly.
    pub(crate) fn deregister(&self, id: ObjectId) {
        let mut t = self.table.write();
        if let Some(h) = t.objects.remove(&id) {
            t.names.remove(h.base.name());
        }
    }

    pub fn resolve(&self, target: TargetRef<'_>) -> Option<ObjectId> {
        let t = self.table.read();
        match target {
            TargetRef::Id(id) => t.objects.contains_key(&id).then_some(id),
            TargetRef::Name(n) => t.names.get(n).copied(),
        }
    }

    pub fn resolve_term(&self, term: &Term) -> Option<ObjectId> {
        match term {
            Term::Host(h) => self.resolve(TargetRef::Id(ObjectId(h.id))),
            Term::Atom(name) => self.resolve(TargetRef::Name(name)),
            _ => None,
        }
    }

    pub fn name_of(&self, id: ObjectId) -> Option<String> {
        self.table.read().objects.get(&id).map(|h| h.base.name().to_string())
    }

    pub fn base(&self, id: ObjectId) -> Option<Arc<BaseObject>> {
        self.table.read().objects.get(&id).map(|h| Arc::clone(&h.base))
    }

    /// Host handle term for a registered object.
    pub fn handle(&self, id: ObjectId) -> Option<Term> {
        let t = self.table.read();
        t.objects.get(&id).map(|h| Term::Host(HostValue::new(id.0, h.base.tag())))
    }

    pub fn watch(&self, target: TargetRef<'_>, owner: &str, filter: SelectorFilter) -> Result<(WatchId, Receiver<MessageIntercept>)> {
        let label = match &target {
            TargetRef::Id(i) => format!("#{}", i.0),
            TargetRef::Name(n) => n.to_string(),
        };
        let target_id = self.resolve(target).ok_or(CoreError::UnknownTarget(label))?;
        let mut t = self.table.write();
        t.next_watch += 1;
        let id = WatchId(t.next_watch);
        let (tx, rx) = unbounded();
        let holder = t.objects.get_mut(&target_id).expect("resolved above");
        holder.watchers.push(Watcher { id, owner: owner.to_string(), filter, tx });
        Ok((id, rx))
    }

    pub fn unwatch(&self, id: WatchId) {
        let mut t = self.table.write();
        for h in t.objects.values_mut() {
            h.watchers.retain(|w| w.id != id);
        }
    }

    pub fn unwatch_owner(&self, owner: &str) {
        let mut t = self.table.write();
        for h in t.objects.values_mut() {
            h.watchers.retain(|w| w.owner != owner);
        }
    }

    pub fn watcher_count(&self, id: ObjectId) -> usize {
        self.table.read().objects.get(&id).map_or(0, |h| h.watchers.len())
    }

    fn notify(watchers: &[(SelectorFilter, Sender<MessageIntercept>)], m: MessageIntercept) {
        for (filter, tx) in watchers {
            if filter.matches(&m.selector) {
                // a closed receiver just means the perceptor is gone
                let _ = tx.send(m.clone());
            }
        }
    }

    fn snapshot(&self, id: ObjectId) -> Option<(Arc<BaseObject>, Vec<WatcherTap>)> {
        let t = self.table.read();
        t.objects.get(&id).map(|h| (Arc::clone(&h.base), h.watchers.iter().map(|w| (w.filter.clone(), w.tx.clone())).collect()))
    }

    fn intercept(&self, id: ObjectId, name: &str, selector: &str, args: &[Term], phase: Phase, result: Option<Term>) -> MessageIntercept {
        MessageIntercept {
            target: id,
            target_name: name.to_string(),
            selector: selector.to_string(),
            args: args.to_vec(),
            phase,
            result,
            seq: self.seq.fetch_add(1, Ordering::SeqCst) + 1,
        }
    }

    /// Invokes a skill. Watchers get a before event, then the skill runs,
    /// then an after event carrying the result or a failure marker. The
    /// returned value is exactly what the skill produced.
    pub fn invoke(&self, target: ObjectId, selector: &str, args: &[Term]) -> Result<Term> {
        let (base, watchers) = self.snapshot(target).ok_or_else(|| CoreError::UnknownTarget(format!("#{}", target.0)))?;
        if !base.has_skill(selector, args.len()) {
            return Err(CoreError::NoSuchSkill { selector: selector.to_string(), arity: args.len() });
        }
        let name = base.name().to_string();
        let interested = watchers.iter().any(|(f, _)| f.matches(selector));
        if interested {
            let m = self.intercept(target, &name, selector, args, Phase::Before, None);
            Self::notify(&watchers, m);
        }
        let result = base.call(selector, args);
        if interested {
            let marker = match &result {
                Ok(v) => v.clone(),
                Err(CoreError::SkillFailed(reason)) => Term::compound("failed", vec![reason.clone()]),
                Err(e) => Term::compound("failed", vec![Term::atom(e.to_string())]),
            };
            let m = self.intercept(target, &name, selector, args, Phase::After, Some(marker));
            Self::notify(&watchers, m);
        }
        result
    }

    /// Reports an invocation that happened outside the skill table (the
    /// communicator's `receiveMessage`) so it can be perceived like any other.
    pub fn announce(&self, target: ObjectId, selector: &str, args: &[Term], result: Term) {
        let Some((base, watchers)) = self.snapshot(target) else { return };
        if !watchers.iter().any(|(f, _)| f.matches(selector)) {
            return;
        }
        let name = base.name().to_string();
        let m = self.intercept(target, &name, selector, args, Phase::Before, None);
        Self::notify(&watchers, m);
        let m = self.intercept(target, &name, selector, args, Phase::After, Some(result));
        Self::notify(&watchers, m);
    }
}

/// The logic engine's view of the dispatcher from inside one agent.
pub struct AgentBridge<'a> {
    pub dispatcher: &'a Dispatcher,
    pub base: Option<ObjectId>,
}

impl HostBridge for AgentBridge<'_> {
    fn send(&self, target: &Term, selector: &str, args: &[Term]) -> Result<Term, LogicError> {
        let id = self.dispatcher.resolve_term(target).ok_or_else(|| LogicError::Host(format!("unknown object {target}")))?;
        self.dispatcher.invoke(id, selector, args).map_err(|e| match e {
            CoreError::NoSuchSkill { selector, .. } => LogicError::NoSuchSkill { selector },
            other => LogicError::Host(other.to_string()),
        })
    }

    fn base_object(&self) -> Option<Term> {
        self.base.and_then(|id| self.dispatcher.handle(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use parking_lot::Mutex;

    fn counter() -> (BaseObject, Arc<Mutex<i64>>) {
        let n = Arc::new(Mutex::new(0));
        let a = Arc::clone(&n);
        let b = Arc::clone(&n);
        let base = BaseObject::new("c", "counter")
            .with_skill("inc", 0, move |_| {
                *a.lock() += 1;
                Ok(Term::int(*a.lock()))
            })
            .with_skill("set", 1, move |args| match args[0].as_int() {
                Some(v) if v >= 0 => {
                    *b.lock() = v;
                    Ok(Term::void())
                }
                _ => Err(CoreError::failed("negative")),
            });
        (base, n)
    }

    #[test]
    fn before_then_after_per_watcher() {
        let d = Dispatcher::new();
        let (base, _) = counter();
        let id = d.register(base).unwrap();
        let (_, rx1) = d.watch(id.into(), "p", SelectorFilter::Any).unwrap();
        let (_, rx2) = d.watch(id.into(), "q", SelectorFilter::only(["inc"])).unwrap();
        assert_eq!(d.invoke(id, "inc", &[]).unwrap(), Term::int(1));
        for rx in [&rx1, &rx2] {
            let ev: Vec<_> = rx.try_iter().collect();
            assert_eq!(ev.len(), 2);
            assert_eq!(ev[0].phase, Phase::Before);
            assert_eq!(ev[0].result, None);
            assert_eq!(ev[1].phase, Phase::After);
            assert_eq!(ev[1].result, Some(Term::int(1)));
            assert!(ev[0].seq < ev[1].seq);
        }
        d.invoke(id, "set", &[Term::int(4)]).unwrap();
        assert_eq!(rx1.try_iter().count(), 2);
        assert_eq!(rx2.try_iter().count(), 0);
    }

    #[test]
    fn failure_still_reports_after_event() {
        let d = Dispatcher::new();
        let (base, _) = counter();
        let id = d.register(base).unwrap();
        let (_, rx) = d.watch(id.into(), "p", SelectorFilter::Any).unwrap();
        let err = d.invoke(id, "set", &[Term::int(-1)]).unwrap_err();
        assert!(matches!(err, CoreError::SkillFailed(_)));
        let ev: Vec<_> = rx.try_iter().collect();
        assert_eq!(ev.len(), 2);
        assert!(ev[1].failed());
        assert_eq!(ev[1].result, Some(Term::compound("failed", vec![Term::atom("negative")])));
    }

    #[test]
    fn unknown_skill_and_target() {
        let d = Dispatcher::new();
        let (base, _) = counter();
        let id = d.register(base).unwrap();
        assert!(matches!(d.invoke(id, "nope", &[]), Err(CoreError::NoSuchSkill { .. })));
        assert!(matches!(d.invoke(id, "inc", &[Term::int(1)]), Err(CoreError::NoSuchSkill { .. })));
        assert!(matches!(d.invoke(ObjectId(99), "inc", &[]), Err(CoreError::UnknownTarget(_))));
        assert!(matches!(d.watch("ghost".into(), "p", SelectorFilter::Any), Err(CoreError::UnknownTarget(_))));
    }

    #[test]
    fn bridge_lifts_results() {
        let d = Dispatcher::new();
        let (base, _) = counter();
        let id = d.register(base).unwrap();
        let bridge = AgentBridge { dispatcher: &d, base: Some(id) };
        let handle = bridge.base_object().unwrap();
        assert_eq!(bridge.send(&handle, "set", &[Term::int(2)]).unwrap(), Term::void());
        assert_eq!(bridge.send(&Term::atom("c"), "inc", &[]).unwrap(), Term::int(3));
        assert!(matches!(bridge.send(&handle, "nope", &[]), Err(LogicError::NoSuchSkill { .. })));
    }
}
