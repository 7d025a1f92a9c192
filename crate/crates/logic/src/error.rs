use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogicError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("invalid clause: {0}")]
    InvalidClause(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("unknown built-in {name}/{arity}")]
    UnknownBuiltin { name: String, arity: usize },
    #[error("no such skill `{selector}`")]
    NoSuchSkill { selector: String },
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
    #[error("no agent context available")]
    NoAgentContext,
    #[error("arguments are not sufficiently instantiated in {0}")]
    Instantiation(String),
    #[error("type error: expected {expected}, found {found}")]
    Type { expected: &'static str, found: String },
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("host call failed: {0}")]
    Host(String),
}
