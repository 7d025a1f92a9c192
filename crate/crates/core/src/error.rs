use stormkit_logic::{LogicError, Term};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("agent name `{0}` already in use")]
    DuplicateAgentName(String),
    #[error("router unreachable: {0}")]
    RouterUnreachable(String),
    #[error("no skill `{selector}/{arity}`")]
    NoSuchSkill { selector: String, arity: usize },
    #[error("skill failed: {0}")]
    SkillFailed(Term),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` has been killed")]
    AgentKilled(String),
    #[error("agent `{agent}` lacks component {component}")]
    MissingComponent { agent: String, component: &'static str },
    #[error("hot-spot `{0}` not defined")]
    HotSpotUndefined(&'static str),
    #[error("plan {0} was invalidated")]
    InvalidatedPlan(String),
    #[error("no plan found after expanding {expanded} nodes")]
    NoPlanFound { expanded: usize },
    #[error("name `{0}` already registered")]
    NameTaken(String),
    #[error("unknown receiver `{0}`")]
    UnknownReceiver(String),
    #[error("codec: {0}")]
    Codec(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid conversation class: {0}")]
    InvalidConversation(String),
    #[error("hook fault: {0}")]
    HookFault(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn failed(reason: &str) -> CoreError {
        CoreError::SkillFailed(Term::atom(reason))
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
