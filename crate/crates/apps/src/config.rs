//! Scenario files. TOML, with clause text either inline or in files named
//! relative to the scenario file:
//!
//! ```toml
//! seed = 1
//! ticks = 3000
//! messages = 10000
//!
//! [forks]
//! layout = ["#####", "#B.S#", "#####"]
//! situations = "forks.situations"   # optional clause file
//! beliefs = "facts.pl"               # optional clause file
//! deliberate = true
//!
//! [[forks.forklift]]
//! name = "f1"
//! x = 2
//! y = 1
//! heading = "e"
//!
//! [[forks.reaction]]                 # optional; replaces the defaults
//! name = "graspBox0"
//! situation = "boxInFront"
//! skill = "graspBox"
//! precondition = "not(holding(_))"
//! effects = ["assert(holding(Box))", "retract(location(box(Box), _, _))"]
//!
//! [queens]
//! n = 8
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stormkit_core::deliberate::Heading;
use stormkit_core::effect::Effect;
use stormkit_core::react::Reaction;
use stormkit_logic::parse_term;

use crate::forks::{ForkliftPlacement, ForksScenario, DEFAULT_SITUATIONS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const DEFAULT_TICKS: u64 = 5_000;
pub const DEFAULT_MESSAGES: u64 = 10_000;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub ticks: Option<u64>,
    pub messages: Option<u64>,
    pub forks: Option<ForksSection>,
    pub queens: Option<QueensSection>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForksSection {
    pub layout: Vec<String>,
    #[serde(default, rename = "forklift")]
    pub forklifts: Vec<ForkliftEntry>,
    pub situations: Option<String>,
    pub beliefs: Option<String>,
    #[serde(default = "yes")]
    pub deliberate: bool,
    #[serde(default, rename = "reaction")]
    pub reactions: Vec<ReactionEntry>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkliftEntry {
    pub name: String,
    pub x: i64,
    pub y: i64,
    #[serde(default = "north")]
    pub heading: String,
}

fn north() -> String {
    "n".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionEntry {
    pub name: String,
    pub situation: String,
    pub skill: String,
    #[serde(default = "truth")]
    pub precondition: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub effects: Vec<String>,
}

fn truth() -> String {
    "true".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueensSection {
    pub n: usize,
}

/// The scenario shipped with the binary.
pub const DEFAULT_FORKS: &str = include_str!("../scenarios/warehouse.toml");

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Config, ConfigError> {
        let mut c: Config = toml::from_str(text)?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn default_forks() -> Config {
        Config::parse(DEFAULT_FORKS, Path::new(".")).expect("default scenario parses")
    }

    fn read_clauses(&self, name: &str) -> Result<String, ConfigError> {
        let path = self.base_dir.join(name);
        std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })
    }

    pub fn forks_scenario(&self) -> Result<ForksScenario, ConfigError> {
        let f = self.forks.as_ref().ok_or_else(|| ConfigError::Invalid("no [forks] section".into()))?;
        let forklifts = f
            .forklifts
            .iter()
            .map(|e| {
                let heading = Heading::parse(&e.heading.to_lowercase())
                    .ok_or_else(|| ConfigError::Invalid(format!("forklift {}: heading {:?}", e.name, e.heading)))?;
                Ok(ForkliftPlacement { name: e.name.clone(), x: e.x, y: e.y, heading })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let layout: Vec<&str> = f.layout.iter().map(String::as_str).collect();
        let mut s = ForksScenario::new(&layout, forklifts);
        s.deliberate = f.deliberate;
        s.situations = match &f.situations {
            Some(file) => self.read_clauses(file)?,
            None => DEFAULT_SITUATIONS.to_string(),
        };
        if let Some(file) = &f.beliefs {
            s.beliefs = self.read_clauses(file)?;
        }
        if !f.reactions.is_empty() {
            s.reactions = f.reactions.iter().map(reaction).collect::<Result<_, _>>()?;
        }
        s.world().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(s)
    }
}

fn reaction(e: &ReactionEntry) -> Result<Reaction, ConfigError> {
    let bad = |what: &str, err: String| ConfigError::Invalid(format!("reaction {}: {what}: {err}", e.name));
    let term = |src: &str, what: &str| parse_term(src).map_err(|err| bad(what, err.to_string()));
    let mut r = Reaction::new(&e.name, &e.situation, &e.skill);
    r.precondition = term(&e.precondition, "precondition")?;
    r.args = e.args.iter().map(|a| term(a, "argument")).collect::<Result<_, _>>()?;
    for src in &e.effects {
        let t = term(src, "effect")?;
        r.effects.push(Effect::from_term(&t).map_err(|err| bad("effect", err.to_string()))?);
    }
    Ok(r)
}
