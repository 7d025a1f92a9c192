use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use stormkit_logic::Term;

use crate::error::{CoreError, Result};

/// A skill body. Skills act on whatever environment they captured and carry
/// no agent logic of their own.
pub type SkillFn = Arc<dyn Fn(&[Term]) -> Result<Term> + Send + Sync>;

#[derive(Clone)]
pub struct Skill {
    pub arity: usize,
    pub body: SkillFn,
}

/// A plain skill holder. Agents are built around one; other objects may be
/// registered with the dispatcher on their own so that they can be watched.
#[derive(Clone)]
pub struct BaseObject {
    name: String,
    tag: String,
    skills: BTreeMap<String, Skill>,
}

impl fmt::Debug for BaseObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseObject")
            .field("name", &self.name)
            .field("tag", &self.tag)
            .field("skills", &self.skills.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl BaseObject {
    pub fn new(name: impl Into<String>, tag: impl Into<String>) -> Self {
        BaseObject { name: name.into(), tag: tag.into(), skills: BTreeMap::new() }
    }

    pub fn with_skill<F>(mut self, selector: &str, arity: usize, body: F) -> Self
    where
        F: Fn(&[Term]) -> Result<Term> + Send + Sync + 'static,
    {
        self.add_skill(selector, arity, body);
        self
    }

    pub fn add_skill<F>(&mut self, selector: &str, arity: usize, body: F)
    where
        F: Fn(&[Term]) -> Result<Term> + Send + Sync + 'static,
    {
        self.skills.insert(selector.to_string(), Skill { arity, body: Arc::new(body) });
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn has_skill(&self, selector: &str, arity: usize) -> bool {
        self.skills.get(selector).is_some_and(|s| s.arity == arity)
    }

    pub fn selectors(&self) -> impl Iterator<Item = (&str, usize)> {
        self.skills.iter().map(|(k, s)| (k.as_str(), s.arity))
    }

    /// Runs the skill directly, bypassing interception. The dispatcher is the
    /// only caller outside tests.
    pub fn call(&self, selector: &str, args: &[Term]) -> Result<Term> {
        match self.skills.get(selector) {
            Some(s) if s.arity == args.len() => (s.body)(args),
            _ => Err(CoreError::NoSuchSkill { selector: selector.to_string(), arity: args.len() }),
        }
    }
}
