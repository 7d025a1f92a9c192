//! Skill holders, the interceptor chain, and agent assembly.

mod agent;
mod base;
mod context;
mod dispatch;
mod runtime;
mod store;

pub use agent::{
    AgentAssembly, AgentSpec, Assembly, BasicAgent, Capabilities, Component, ComponentSet, HandlerFactory, KsFactory, PerceptorSpec,
};
pub use base::{BaseObject, Skill, SkillFn};
pub use context::{module_order, AgentContext};
pub use dispatch::{AgentBridge, Dispatcher, MessageIntercept, ObjectId, Phase, SelectorFilter, TargetRef, WatchId};
pub use runtime::{AgentHandle, LinkMode, Runtime};
pub use store::MentalStore;
