use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crossbeam_channel::{Receiver, Sender};
use stormkit_logic::{LogicModule, MentalState};

use super::context::AgentContext;
use super::dispatch::SelectorFilter;
use crate::comms::{Communicator, HandlerSet, SharedLink};
use crate::conv::{ConvInput, ConversationClass, ConversationEngine, SharedInstances};
use crate::deliberate::{Executor, KnowledgeSource, KsTask, PlanAdapter};
use crate::error::{CoreError, Result};
use crate::percept::{register_perceptor, ForwardHandler, PerceptionHandler, SituationDefinition, SituationManager, Trigger};
use crate::react::{Reaction, Reactor, ReactorTask};
use crate::sched::Task;

/// Input channel and instance table of a conversation engine.
pub(crate) type ConvWiring = (Sender<ConvInput>, SharedInstances);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Capabilities {
    pub perception: bool,
    pub reaction: bool,
    pub deliberation: bool,
    pub communication: bool,
}

impl Capabilities {
    pub fn none() -> Self {
        Capabilities::default()
    }

    pub fn all() -> Self {
        Capabilities::from_bits(0b1111)
    }

    /// Bit 0 perception, 1 reaction, 2 deliberation, 3 communication.
    pub fn from_bits(bits: u8) -> Self {
        Capabilities { perception: bits & 1 != 0, reaction: bits & 2 != 0, deliberation: bits & 4 != 0, communication: bits & 8 != 0 }
    }

    pub fn bits(self) -> u8 {
        self.perception as u8 | (self.reaction as u8) << 1 | (self.deliberation as u8) << 2 | (self.communication as u8) << 3
    }

    /// Every flag combination, in bit order.
    pub fn combinations() -> impl Iterator<Item = Capabilities> {
        (0..16u8).map(Capabilities::from_bits)
    }

    /// The components an agent with these flags is built from. Situations
    /// are detected from perceptions and from messages, so the situation
    /// manager comes with either.
    pub fn components(self) -> ComponentSet {
        let mut set = ComponentSet::new();
        if self.perception {
            set.insert(Component::Perceptors);
        }
        if self.perception || self.communication {
            set.insert(Component::SituationManager);
        }
        if self.reaction {
            set.insert(Component::Reactor);
        }
        if self.deliberation {
            set.insert(Component::Deliberator);
        }
        if self.communication {
            set.insert(Component::Communicator);
        }
        set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Perceptors,
    SituationManager,
    Reactor,
    Deliberator,
    Communicator,
}

pub type ComponentSet = BTreeSet<Component>;

pub type HandlerFactory = Arc<dyn Fn() -> Box<dyn PerceptionHandler> + Send + Sync>;
pub type KsFactory = Arc<dyn Fn() -> Box<dyn KnowledgeSource> + Send + Sync>;

#[derive(Clone)]
pub struct PerceptorSpec {
    /// Name of the watched skill holder; the agent's own name watches itself.
    pub target: String,
    pub filter: SelectorFilter,
    pub handler: HandlerFactory,
}

impl PerceptorSpec {
    pub fn new(target: &str, filter: SelectorFilter) -> Self {
        PerceptorSpec { target: target.to_string(), filter, handler: Arc::new(|| Box::new(ForwardHandler)) }
    }

    pub fn handler<F>(mut self, f: F) -> Self
    where
        F: Fn() -> Box<dyn PerceptionHandler> + Send + Sync + 'static,
    {
        self.handler = Arc::new(f);
        self
    }
}

impl fmt::Debug for PerceptorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerceptorSpec").field("target", &self.target).field("filter", &self.filter).finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct AgentSpec {
    pub name: String,
    pub capabilities: Capabilities,
    /// Loaded into the mental state before anything else.
    pub modules: Vec<LogicModule>,
    /// Also loaded into the mental state; their `situation/N` heads are the
    /// situations the agent detects.
    pub situation_modules: Vec<LogicModule>,
    pub perceptors: Vec<PerceptorSpec>,
    pub reactions: Vec<Reaction>,
    pub knowledge_sources: Vec<KsFactory>,
    pub conversation_classes: Vec<String>,
    pub handlers: HandlerSet,
}

impl fmt::Debug for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentSpec")
            .field("name", &self.name)
            .field("capabilities", &self.capabilities)
            .field("perceptors", &self.perceptors)
            .field("reactions", &self.reactions.len())
            .field("knowledge_sources", &self.knowledge_sources.len())
            .field("conversation_classes", &self.conversation_classes)
            .finish_non_exhaustive()
    }
}

impl AgentSpec {
    pub fn new(name: &str, capabilities: Capabilities) -> Self {
        AgentSpec {
            name: name.to_string(),
            capabilities,
            modules: Vec::new(),
            situation_modules: Vec::new(),
            perceptors: Vec::new(),
            reactions: Vec::new(),
            knowledge_sources: Vec::new(),
            conversation_classes: Vec::new(),
            handlers: HandlerSet::default(),
        }
    }

    pub fn module(mut self, m: LogicModule) -> Self {
        self.modules.push(m);
        self
    }

    pub fn situations(mut self, m: LogicModule) -> Self {
        self.situation_modules.push(m);
        self
    }

    pub fn perceptor(mut self, p: PerceptorSpec) -> Self {
        self.perceptors.push(p);
        self
    }

    pub fn reaction(mut self, r: Reaction) -> Self {
        self.reactions.push(r);
        self
    }

    pub fn knowledge_source<F>(mut self, f: F) -> Self
    where
        F: Fn() -> Box<dyn KnowledgeSource> + Send + Sync + 'static,
    {
        self.knowledge_sources.push(Arc::new(f));
        self
    }

    pub fn conversation(mut self, class: &str) -> Self {
        self.conversation_classes.push(class.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::comms::is_token(&self.name) {
            return Err(CoreError::InvalidSpec(format!("agent name {:?} is not a token", self.name)));
        }
        let c = self.capabilities;
        let unused = |what: &str| Err(CoreError::InvalidSpec(format!("{}: {what}", self.name)));
        if !c.perception && !self.perceptors.is_empty() {
            return unused("perceptors without perception");
        }
        if !c.reaction && !self.reactions.is_empty() {
            return unused("reactions without reaction");
        }
        if !c.deliberation && !self.knowledge_sources.is_empty() {
            return unused("knowledge sources without deliberation");
        }
        if !c.communication && !self.conversation_classes.is_empty() {
            return unused("conversations without communication");
        }
        Ok(())
    }
}

/// Work in progress while an agent is assembled.
pub struct Assembly<'a> {
    pub spec: &'a AgentSpec,
    pub cx: Arc<AgentContext>,
    pub components: ComponentSet,
    pub tasks: Vec<Box<dyn Task>>,
    pub(crate) link: Option<SharedLink>,
    pub(crate) outbox: Option<Receiver<crate::comms::AclMessage>>,
    pub(crate) classes: Vec<Arc<ConversationClass>>,
    situation_manager: Option<SituationManager>,
    situation_input: Option<Sender<Trigger>>,
    pub(crate) conversations: Option<(Sender<ConvInput>, SharedInstances)>,
}

impl<'a> Assembly<'a> {
    pub(crate) fn new(
        spec: &'a AgentSpec,
        cx: Arc<AgentContext>,
        link: Option<SharedLink>,
        outbox: Option<Receiver<crate::comms::AclMessage>>,
        classes: Vec<Arc<ConversationClass>>,
    ) -> Self {
        Assembly {
            spec,
            cx,
            components: ComponentSet::new(),
            tasks: Vec::new(),
            link,
            outbox,
            classes,
            situation_manager: None,
            situation_input: None,
            conversations: None,
        }
    }

    /// Creates the situation manager from the spec's situation modules.
    pub fn init_situations(&mut self) -> Result<()> {
        let defs: Vec<SituationDefinition> = self.spec.situation_modules.iter().flat_map(SituationDefinition::from_module).collect();
        let (sm, tx) = SituationManager::new(Arc::clone(&self.cx), defs);
        self.situation_manager = Some(sm);
        self.situation_input = Some(tx);
        self.components.insert(crate::kernel::Component::SituationManager);
        Ok(())
    }

    pub fn init_perception(&mut self) -> Result<()> {
        for p in &self.spec.perceptors {
            let target = crate::kernel::TargetRef::Name(&p.target);
            let perceptor = register_perceptor(&self.cx, target, p.filter.clone(), (p.handler)(), self.situation_input.clone())?;
            self.tasks.push(Box::new(perceptor));
        }
        self.components.insert(Component::Perceptors);
        Ok(())
    }

    pub fn init_reaction(&mut self) -> Result<()> {
        let (task, tx) = ReactorTask::new(Arc::clone(&self.cx), Reactor::new(self.spec.reactions.clone()));
        if let Some(sm) = &mut self.situation_manager {
            sm.connect(tx);
        }
        self.tasks.push(Box::new(task));
        self.components.insert(Component::Reactor);
        Ok(())
    }

    /// The executor and plan adapter, then the spec's knowledge sources.
    pub fn init_deliberation(&mut self) -> Result<()> {
        let executor: Box<dyn KnowledgeSource> = Box::new(Executor::new("executor"));
        let adapter: Box<dyn KnowledgeSource> = Box::new(PlanAdapter::new("adapter"));
        let custom = self.spec.knowledge_sources.iter().map(|f| f());
        for ks in [executor, adapter].into_iter().chain(custom) {
            if self.cx.knowledge_sources().iter().any(|k| k == ks.id()) {
                return Err(CoreError::InvalidSpec(format!("duplicate knowledge source {}", ks.id())));
            }
            self.tasks.push(Box::new(KsTask::new(&self.cx, ks)));
        }
        self.components.insert(Component::Deliberator);
        Ok(())
    }

    pub fn init_communication(&mut self) -> Result<()> {
        let (Some(link), Some(outbox)) = (self.link.clone(), self.outbox.take()) else {
            return Err(CoreError::InvalidSpec("communication without a link".into()));
        };
        let mut comm = Communicator::new(Arc::clone(&self.cx), link, outbox).with_handlers(self.spec.handlers.clone());
        if let Some(tx) = &self.situation_input {
            comm.feed_situations(tx.clone());
        }
        let (engine, tx, instances) = ConversationEngine::new(Arc::clone(&self.cx), self.classes.clone());
        comm.feed_conversations(tx.clone());
        self.conversations = Some((tx, instances));
        self.tasks.push(Box::new(comm));
        self.tasks.push(Box::new(engine));
        self.components.insert(Component::Communicator);
        Ok(())
    }

    pub(crate) fn finish(mut self) -> (ComponentSet, Vec<Box<dyn Task>>, Option<ConvWiring>) {
        if let Some(sm) = self.situation_manager.take() {
            self.tasks.insert(0, Box::new(sm));
        }
        (self.components, self.tasks, self.conversations)
    }
}

/// The assembly template. A runtime calls the hooks in order: mental state,
/// situations, perception, reaction, deliberation, communication, each only
/// when its capability is set. Override a hook to change how that component
/// is built.
pub trait AgentAssembly: Send + Sync {
    fn init_mental_state(&self, spec: &AgentSpec) -> Result<MentalState> {
        let mut ms = MentalState::new();
        for m in spec.modules.iter().chain(&spec.situation_modules) {
            ms.ensure_module(m.name()).extend(m.clauses().iter().cloned());
        }
        Ok(ms)
    }

    fn init_situations(&self, a: &mut Assembly<'_>) -> Result<()> {
        a.init_situations()
    }

    fn init_perception(&self, a: &mut Assembly<'_>) -> Result<()> {
        a.init_perception()
    }

    fn init_reaction(&self, a: &mut Assembly<'_>) -> Result<()> {
        a.init_reaction()
    }

    fn init_deliberation(&self, a: &mut Assembly<'_>) -> Result<()> {
        a.init_deliberation()
    }

    fn init_communication(&self, a: &mut Assembly<'_>) -> Result<()> {
        a.init_communication()
    }
}

/// Builds every component the default way.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasicAgent;

impl AgentAssembly for BasicAgent {}
