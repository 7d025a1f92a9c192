use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};
use parking_lot::Mutex;
use stormkit_logic::{Engine, MentalState, Term};

use super::agent::{AgentAssembly, AgentSpec, Assembly, BasicAgent, ComponentSet};
use super::base::BaseObject;
use super::context::{AgentContext, ContextParts};
use super::dispatch::{Dispatcher, ObjectId};
use super::store::MentalStore;
use crate::bus::{ControlEvent, ControlKind, EventKind};
use crate::comms::{encode, AclMessage, Link, LocalLink, Router, SharedLink, TcpLink};
use crate::conv::{ConvInput, ConversationClass, ConversationInstance, SharedInstances};
use crate::error::{CoreError, Result};
use crate::sched::{RoundStats, Scheduler, Task};
use crate::trace::{Clock, Trace};

/// How communicating agents reach the router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinkMode {
    InProcess,
    Tcp { addr: String, timeout: Duration },
}

/// A live agent. Becomes unusable once killed.
pub struct AgentHandle {
    pub spec: AgentSpec,
    pub cx: Arc<AgentContext>,
    components: ComponentSet,
    link: Option<SharedLink>,
    outbox: Option<Receiver<AclMessage>>,
    conversations: Option<(Sender<ConvInput>, SharedInstances)>,
    next_conversation: u64,
}

impl std::fmt::Debug for AgentHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentHandle").field("name", &self.cx.name).field("components", &self.components).finish_non_exhaustive()
    }
}

impl AgentHandle {
    pub fn name(&self) -> &str {
        &self.cx.name
    }

    pub fn base(&self) -> ObjectId {
        self.cx.base
    }

    pub fn components(&self) -> &ComponentSet {
        &self.components
    }

    pub fn store(&self) -> &MentalStore {
        &self.cx.store
    }

    pub fn mental_state(&self) -> MentalState {
        self.cx.store.snapshot()
    }

    pub fn is_alive(&self) -> bool {
        self.cx.is_alive()
    }

    pub fn invoke(&self, selector: &str, args: &[Term]) -> Result<Term> {
        self.cx.invoke(selector, args)
    }

    pub fn conversation(&self, id: &str) -> Option<ConversationInstance> {
        self.conversations.as_ref()?.1.lock().get(id).cloned()
    }

    pub fn conversations(&self) -> Vec<ConversationInstance> {
        self.conversations.as_ref().map(|(_, i)| i.lock().values().cloned().collect()).unwrap_or_default()
    }

    /// Queues an input for the conversation engine.
    pub fn converse(&self, input: ConvInput) -> Result<()> {
        let (tx, _) =
            self.conversations.as_ref().ok_or(CoreError::MissingComponent { agent: self.cx.name.clone(), component: "communicator" })?;
        tx.send(input).map_err(|_| CoreError::AgentKilled(self.cx.name.clone()))
    }
}

/// Owns everything a set of agents shares: the dispatcher, the router, the
/// clock, the trace, and the scheduler that drives every component task.
pub struct Runtime {
    pub dispatcher: Arc<Dispatcher>,
    pub router: Arc<Router>,
    pub trace: Trace,
    clock: Clock,
    scheduler: Scheduler,
    engine: Arc<Engine>,
    link_mode: LinkMode,
    classes: BTreeMap<String, Arc<ConversationClass>>,
    agents: BTreeMap<String, AgentHandle>,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime").field("agents", &self.agents.keys().collect::<Vec<_>>()).finish_non_exhaustive()
    }
}

impl Runtime {
    pub fn new(seed: u64) -> Self {
        let clock = Clock::default();
        Runtime {
            dispatcher: Arc::new(Dispatcher::new()),
            router: Router::new(),
            trace: Trace::new(clock.clone()),
            scheduler: Scheduler::new(seed, clock.clone()),
            clock,
            engine: Arc::new(Engine::default()),
            link_mode: LinkMode::InProcess,
            classes: BTreeMap::new(),
            agents: BTreeMap::new(),
        }
    }

    pub fn with_router(mut self, router: Arc<Router>) -> Self {
        self.router = router;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = Arc::new(engine);
        self
    }

    pub fn with_link_mode(mut self, mode: LinkMode) -> Self {
        self.link_mode = mode;
        self
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn register_class(&mut self, class: ConversationClass) -> Result<()> {
        class.validate()?;
        self.classes.insert(class.name.clone(), Arc::new(class));
        Ok(())
    }

    /// Registers a plain skill holder that is not an agent.
    pub fn add_object(&self, base: BaseObject) -> Result<ObjectId> {
        self.dispatcher.register(base)
    }

    pub fn spawn_task(&mut self, task: Box<dyn Task>) {
        self.scheduler.spawn(task);
    }

    pub fn create_agent(&mut self, spec: AgentSpec, base: BaseObject) -> Result<&AgentHandle> {
        self.create_agent_with(spec, base, &BasicAgent)
    }

    /// Assembles an agent around `base` using the hooks of `assembly`.
    pub fn create_agent_with(&mut self, spec: AgentSpec, base: BaseObject, assembly: &dyn AgentAssembly) -> Result<&AgentHandle> {
        spec.validate()?;
        if base.name() != spec.name {
            return Err(CoreError::InvalidSpec(format!("base object {} does not match agent {}", base.name(), spec.name)));
        }
        if self.agents.contains_key(&spec.name) || self.dispatcher.resolve(spec.name.as_str().into()).is_some() {
            return Err(CoreError::DuplicateAgentName(spec.name.clone()));
        }
        let classes = spec
            .conversation_classes
            .iter()
            .map(|c| self.classes.get(c).cloned().ok_or_else(|| CoreError::InvalidConversation(format!("unknown class {c}"))))
            .collect::<Result<Vec<_>>>()?;
        let state = assembly.init_mental_state(&spec)?;
        let caps = spec.capabilities;

        let link = if caps.communication { Some(self.connect(&spec.name)?) } else { None };
        let id = match self.dispatcher.register(base) {
            Ok(id) => id,
            Err(e) => {
                if let Some(l) = &link {
                    l.lock().close();
                }
                return Err(e);
            }
        };
        let (outbox_tx, outbox_rx) = if caps.communication {
            let (tx, rx) = unbounded();
            (Some(tx), Some(rx))
        } else {
            (None, None)
        };
        let cx = Arc::new(AgentContext::new(ContextParts {
            name: spec.name.clone(),
            base: id,
            dispatcher: Arc::clone(&self.dispatcher),
            state,
            engine: Arc::clone(&self.engine),
            trace: self.trace.clone(),
            outbox: outbox_tx,
        }));

        let mut a = Assembly::new(&spec, Arc::clone(&cx), link.clone(), outbox_rx.clone(), classes);
        let built = (|| {
            if caps.perception || caps.communication {
                assembly.init_situations(&mut a)?;
            }
            if caps.perception {
                assembly.init_perception(&mut a)?;
            }
            if caps.reaction {
                assembly.init_reaction(&mut a)?;
            }
            if caps.deliberation {
                assembly.init_deliberation(&mut a)?;
            }
            if caps.communication {
                assembly.init_communication(&mut a)?;
            }
            Ok::<_, CoreError>(())
        })();
        if let Err(e) = built {
            cx.mark_dead();
            self.dispatcher.unwatch_owner(&spec.name);
            self.dispatcher.deregister(id);
            if let Some(l) = &link {
                l.lock().close();
                self.router.deregister(&spec.name);
            }
            return Err(e);
        }
        let (components, tasks, conversations) = a.finish();
        for t in tasks {
            self.scheduler.spawn(t);
        }
        cx.bus.emit(EventKind::AgentStarted, Term::atom(spec.name.as_str()));
        let name = spec.name.clone();
        let handle = AgentHandle { spec, cx, components, link, outbox: outbox_rx, conversations, next_conversation: 0 };
        self.agents.insert(name.clone(), handle);
        Ok(&self.agents[&name])
    }

    fn connect(&self, name: &str) -> Result<SharedLink> {
        let link: Box<dyn Link> = match &self.link_mode {
            LinkMode::InProcess => Box::new(LocalLink::connect(&self.router, name)?),
            LinkMode::Tcp { addr, timeout } => Box::new(TcpLink::connect(addr.as_str(), name, *timeout)?),
        };
        Ok(Arc::new(Mutex::new(link)))
    }

    pub fn agent(&self, name: &str) -> Option<&AgentHandle> {
        self.agents.get(name)
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.agents.keys().cloned().collect()
    }

    fn live(&self, name: &str) -> Result<&AgentHandle> {
        self.agents.get(name).ok_or_else(|| CoreError::UnknownAgent(name.to_string()))
    }

    pub fn invoke(&self, agent: &str, selector: &str, args: &[Term]) -> Result<Term> {
        self.live(agent)?.invoke(selector, args)
    }

    pub fn control(&self, agent: &str, kind: ControlKind, target: &str, payload: Term) -> Result<()> {
        self.live(agent)?.cx.control(ControlEvent { kind, target: target.to_string(), payload })
    }

    /// Sends anything still in the outbox, so it is not lost when the link goes.
    fn flush_outbox(h: &AgentHandle) {
        let (Some(link), Some(outbox)) = (&h.link, &h.outbox) else { return };
        let mut link = link.lock();
        while let Ok(m) = outbox.try_recv() {
            if let Ok(env) = encode(&m) {
                let _ = link.send(env);
            }
        }
    }

    /// Stops every component of `name`. Messages not yet read stay with the
    /// router for delivery if the name registers again.
    pub fn kill(&mut self, name: &str) -> Result<()> {
        let h = self.agents.remove(name).ok_or_else(|| CoreError::UnknownAgent(name.to_string()))?;
        let _ = h.cx.control(ControlEvent { kind: ControlKind::Kill, target: "*".into(), payload: Term::atom("kill") });
        Self::flush_outbox(&h);
        h.cx.bus.emit(EventKind::AgentKilled, Term::atom(name));
        h.cx.mark_dead();
        self.dispatcher.unwatch_owner(name);
        if let Some(link) = &h.link {
            link.lock().close();
        }
        Ok(())
    }

    /// Takes the agent off the router; messages for it queue up meanwhile.
    pub fn go_offline(&self, name: &str) -> Result<()> {
        let h = self.live(name)?;
        Self::flush_outbox(h);
        if let Some(link) = &h.link {
            link.lock().close();
        }
        Ok(())
    }

    /// Reconnects an agent that went offline; queued messages arrive in order.
    pub fn go_online(&self, name: &str) -> Result<()> {
        let h = self.live(name)?;
        let Some(link) = &h.link else {
            return Err(CoreError::MissingComponent { agent: name.to_string(), component: "communicator" });
        };
        let fresh = self.connect(name)?;
        let mut fresh = fresh.lock();
        let mut current = link.lock();
        std::mem::swap(&mut *current, &mut *fresh);
        Ok(())
    }

    /// Starts a conversation of `class` on `agent` with `peers`; the instance
    /// is created, and sees its start event, on the engine's next poll.
    pub fn spawn_conversation(&mut self, agent: &str, class: &str, peers: &[&str]) -> Result<String> {
        if !self.classes.contains_key(class) {
            return Err(CoreError::InvalidConversation(format!("unknown class {class}")));
        }
        let h = self.agents.get_mut(agent).ok_or_else(|| CoreError::UnknownAgent(agent.to_string()))?;
        if !h.spec.conversation_classes.iter().any(|c| c == class) {
            return Err(CoreError::InvalidConversation(format!("{agent} does not take part in {class}")));
        }
        h.next_conversation += 1;
        let id = format!("{agent}.{class}.{}", h.next_conversation);
        h.converse(ConvInput::Spawn { id: id.clone(), class: class.to_string(), peers: peers.iter().map(|p| p.to_string()).collect() })?;
        Ok(id)
    }

    /// Delivers a signal to one conversation instance, or all of them.
    pub fn signal(&self, agent: &str, instance: Option<&str>, term: Term) -> Result<()> {
        self.live(agent)?.converse(ConvInput::Signal { instance: instance.map(str::to_string), term })
    }

    pub fn round(&mut self) -> RoundStats {
        self.scheduler.round()
    }

    pub fn rounds(&self) -> u64 {
        self.scheduler.rounds()
    }

    /// Runs rounds until one does no work, at most `max_rounds`. Returns the
    /// rounds run.
    pub fn run_until_quiet(&mut self, max_rounds: u64) -> u64 {
        self.scheduler.run_until_quiet(max_rounds)
    }

    pub fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.scheduler
    }

    pub fn task_labels(&self) -> Vec<String> {
        self.scheduler.labels()
    }
}
