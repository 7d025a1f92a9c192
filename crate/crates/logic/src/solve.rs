//! SLD resolution: leftmost goal first, clauses tried in module order and
//! then clause order, with a per-branch depth limit and a global step budget.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::sync::LazyLock;

use crate::builtins::{self, eval, BuiltinFn, CallContext, Constructors, HostBridge};
use crate::db::{LogicModule, MentalState};
use crate::error::LogicError;
use crate::subst::{unify, Substitution};
use crate::term::{Number, Term, Var};

pub const DEFAULT_DEPTH_LIMIT: usize = 512;
pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// Names handled by the resolver itself rather than the built-in table.
const CONTROL: &[(&str, usize)] =
    &[("true", 0), ("fail", 0), ("false", 0), (",", 2), (";", 2), ("not", 1), ("\\+", 1), ("call", 1), ("between", 3), ("findall", 3)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Maximum resolution depth of any branch; deeper branches are pruned.
    pub depth_limit: usize,
    /// Total clause resolutions per query; the stream ends silently beyond it.
    pub step_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { depth_limit: DEFAULT_DEPTH_LIMIT, step_limit: DEFAULT_STEP_LIMIT }
    }
}

/// Built-in table, constructors and limits.
#[derive(Clone)]
pub struct Engine {
    builtins: BTreeMap<(String, usize), BuiltinFn>,
    builtin_names: BTreeSet<String>,
    constructors: Constructors,
    pub options: SolveOptions,
}

impl Default for Engine {
    fn default() -> Self {
        let builtins = builtins::standard();
        let mut engine =
            Engine { builtins, builtin_names: BTreeSet::new(), constructors: Constructors::default(), options: SolveOptions::default() };
        engine.reindex();
        engine
    }
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("builtins", &self.builtins.keys().collect::<Vec<_>>())
            .field("constructors", &self.constructors)
            .field("options", &self.options)
            .finish()
    }
}

static DEFAULT_ENGINE: LazyLock<Engine> = LazyLock::new(Engine::default);

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    fn reindex(&mut self) {
        self.builtin_names = self.builtins.keys().map(|(n, _)| n.clone()).chain(CONTROL.iter().map(|(n, _)| n.to_string())).collect();
    }

    pub fn register_builtin(&mut self, name: &str, arity: usize, f: BuiltinFn) {
        self.builtins.insert((name.to_string(), arity), f);
        self.reindex();
    }

    pub fn constructors_mut(&mut self) -> &mut Constructors {
        &mut self.constructors
    }

    pub fn constructors(&self) -> &Constructors {
        &self.constructors
    }

    pub fn is_builtin(&self, name: &str, arity: usize) -> bool {
        self.builtins.contains_key(&(name.to_string(), arity)) || CONTROL.contains(&(name, arity))
    }

    /// Lazily enumerates solutions of `goal` over the given modules.
    pub fn solve<'a>(
        &'a self,
        goal: &Term,
        ms: &'a MentalState,
        module_order: &[&str],
        bridge: Option<&'a dyn HostBridge>,
    ) -> Solutions<'a> {
        self.solve_goals(std::slice::from_ref(goal), ms, module_order, bridge)
    }

    /// Like [`Engine::solve`] for a conjunction of goals.
    pub fn solve_goals<'a>(
        &'a self,
        goals: &[Term],
        ms: &'a MentalState,
        module_order: &[&str],
        bridge: Option<&'a dyn HostBridge>,
    ) -> Solutions<'a> {
        let mut vars = Vec::new();
        goals.iter().for_each(|g| g.collect_vars(&mut vars));
        let mut modules = Vec::with_capacity(module_order.len());
        let mut error = None;
        for name in module_order {
            match ms.module(name) {
                Some(m) => modules.push(m),
                None => error = Some(LogicError::UnknownModule(name.to_string())),
            }
        }
        let mut s = Solutions {
            engine: self,
            modules: Rc::new(modules),
            bridge,
            vars,
            current: Some((push_all(goals, 0, None), Substitution::new())),
            stack: Vec::new(),
            counters: Rc::new(Counters { generation: Cell::new(0), steps: Cell::new(0) }),
            options: self.options,
            done: false,
            pending_error: error,
        };
        if s.pending_error.is_some() {
            s.current = None;
        }
        s
    }

    /// First solution, if any.
    pub fn solve_first(
        &self,
        goal: &Term,
        ms: &MentalState,
        module_order: &[&str],
        bridge: Option<&dyn HostBridge>,
    ) -> Result<Option<Substitution>, LogicError> {
        self.solve(goal, ms, module_order, bridge).next().transpose()
    }

    /// All solutions, failing on the first error.
    pub fn solve_all(
        &self,
        goal: &Term,
        ms: &MentalState,
        module_order: &[&str],
        bridge: Option<&dyn HostBridge>,
    ) -> Result<Vec<Substitution>, LogicError> {
        self.solve(goal, ms, module_order, bridge).collect()
    }
}

/// Solves `goal` with the default built-ins and no host bridge.
pub fn solve<'a>(goal: &Term, ms: &'a MentalState, module_order: &[&str], depth_limit: usize) -> Solutions<'a> {
    let mut s = DEFAULT_ENGINE.solve(goal, ms, module_order, None);
    s.options.depth_limit = depth_limit.max(1);
    s
}

struct GoalNode {
    goal: Term,
    depth: usize,
    next: Goals,
}

type Goals = Option<Rc<GoalNode>>;

fn push(goal: Term, depth: usize, next: Goals) -> Goals {
    Some(Rc::new(GoalNode { goal, depth, next }))
}

fn push_all(goals: &[Term], depth: usize, next: Goals) -> Goals {
    goals.iter().rev().fold(next, |acc, g| push(g.clone(), depth, acc))
}

enum Alt {
    Clauses { goal: Term, depth: usize, module: usize, clause: usize },
    Goals(Goals),
    Between { target: Term, next: i64, hi: i64 },
}

struct ChoicePoint {
    subst: Substitution,
    rest: Goals,
    alt: Alt,
}

struct Counters {
    generation: Cell<u32>,
    steps: Cell<u64>,
}

/// Lazy stream of solutions; each is restricted to the query's variables.
/// An error ends the stream.
pub struct Solutions<'a> {
    engine: &'a Engine,
    modules: Rc<Vec<&'a LogicModule>>,
    bridge: Option<&'a dyn HostBridge>,
    vars: Vec<Var>,
    current: Option<(Goals, Substitution)>,
    stack: Vec<ChoicePoint>,
    counters: Rc<Counters>,
    options: SolveOptions,
    done: bool,
    pending_error: Option<LogicError>,
}

impl<'a> Solutions<'a> {
    pub fn with_depth_limit(mut self, depth_limit: usize) -> Self {
        self.options.depth_limit = depth_limit.max(1);
        self
    }

    pub fn with_step_limit(mut self, steps: u64) -> Self {
        self.options.step_limit = steps;
        self
    }

    /// Number of clause resolutions performed so far.
    pub fn steps(&self) -> u64 {
        self.counters.steps.get()
    }

    fn child(&self, goals: &[Term], vars: Vec<Var>, depth: usize, subst: Substitution) -> Solutions<'a> {
        Solutions {
            engine: self.engine,
            modules: Rc::clone(&self.modules),
            bridge: self.bridge,
            vars,
            current: Some((push_all(goals, depth, None), subst)),
            stack: Vec::new(),
            counters: Rc::clone(&self.counters),
            options: self.options,
            done: false,
            pending_error: None,
        }
    }

    fn fresh_generation(&self) -> u32 {
        let g = self.counters.generation.get() + 1;
        self.counters.generation.set(g);
        g
    }

    fn context(&self) -> CallContext<'a> {
        CallContext { bridge: self.bridge, constructors: &self.engine.constructors }
    }

    fn has_user_clauses(&self, name: &str, arity: usize) -> bool {
        self.modules.iter().any(|m| m.clauses().iter().any(|c| c.head.indicator() == Some((name, arity))))
    }

    fn step(&mut self, node: Rc<GoalNode>, subst: Substitution) -> Result<(), LogicError> {
        let goal = subst.walk(&node.goal);
        let depth = node.depth;
        let next = node.next.clone();
        let (name, arity) = match &goal {
            Term::Var(_) => return Err(LogicError::Instantiation("goal".into())),
            Term::Number(_) | Term::Host(_) => return Err(LogicError::Type { expected: "callable", found: goal.to_string() }),
            t => {
                let (n, a) = t.indicator().expect("callable");
                (n.to_string(), a)
            }
        };
        let args = goal.args();
        match (name.as_str(), arity) {
            ("true", 0) => self.current = Some((next, subst)),
            ("fail", 0) | ("false", 0) => {}
            (",", 2) => {
                self.current = Some((push(args[0].clone(), depth, push(args[1].clone(), depth, next)), subst));
            }
            (";", 2) => {
                self.stack.push(ChoicePoint {
                    subst: subst.clone(),
                    rest: None,
                    alt: Alt::Goals(push(args[1].clone(), depth, next.clone())),
                });
                self.current = Some((push(args[0].clone(), depth, next), subst));
            }
            ("not", 1) | ("\\+", 1) => {
                let inner = subst.apply(&args[0]);
                let mut sub = self.child(&[inner], Vec::new(), depth, subst.clone());
                match sub.next() {
                    Some(Err(e)) => return Err(e),
                    Some(Ok(_)) => {}
                    None => self.current = Some((next, subst)),
                }
            }
            ("call", 1) => self.current = Some((push(args[0].clone(), depth, next), subst)),
            ("findall", 3) => {
                let template = args[0].clone();
                let mut vars = Vec::new();
                template.collect_vars(&mut vars);
                let sub = self.child(&[args[1].clone()], vars, depth, subst.clone());
                let mut items = Vec::new();
                for sol in sub {
                    items.push(sol?.apply(&subst.apply(&template)));
                }
                let mut s = subst;
                if s.unify_in_place(&args[2], &Term::list(items)) {
                    self.current = Some((next, s));
                }
            }
            ("between", 3) => {
                let lo = int_value(&args[0], &subst)?;
                let hi = int_value(&args[1], &subst)?;
                let target = subst.walk(&args[2]);
                match target {
                    Term::Number(Number::Int(x)) => {
                        if lo <= x && x <= hi {
                            self.current = Some((next, subst));
                        }
                    }
                    Term::Var(_) => {
                        if lo <= hi {
                            if lo < hi {
                                self.stack.push(ChoicePoint {
                                    subst: subst.clone(),
                                    rest: next.clone(),
                                    alt: Alt::Between { target: target.clone(), next: lo + 1, hi },
                                });
                            }
                            let mut s = subst;
                            s.unify_in_place(&target, &Term::int(lo));
                            self.current = Some((next, s));
                        }
                    }
                    other => return Err(LogicError::Type { expected: "integer", found: other.to_string() }),
                }
            }
            _ => {
                if let Some(f) = self.engine.builtins.get(&(name.clone(), arity)) {
                    let mut s = subst;
                    if f(args, &mut s, &self.context())? {
                        self.current = Some((next, s));
                    }
                } else if self.engine.builtin_names.contains(&name) && !self.has_user_clauses(&name, arity) {
                    return Err(LogicError::UnknownBuiltin { name, arity });
                } else {
                    self.resolve(goal, depth, 0, 0, subst, next);
                }
            }
        }
        Ok(())
    }

    fn resolve(&mut self, goal: Term, depth: usize, module: usize, clause: usize, subst: Substitution, rest: Goals) {
        if depth >= self.options.depth_limit {
            return;
        }
        let Some((name, arity)) = goal.indicator() else { return };
        let modules = Rc::clone(&self.modules);
        let mut positions = (module..modules.len()).flat_map(|m| {
            let start = if m == module { clause } else { 0 };
            let clauses = modules[m].clauses();
            (start..clauses.len()).map(move |c| (m, c))
        });
        while let Some((m, c)) = positions.next() {
            let stored = &modules[m].clauses()[c];
            if stored.head.indicator() != Some((name, arity)) {
                continue;
            }
            let steps = self.counters.steps.get() + 1;
            self.counters.steps.set(steps);
            if steps > self.options.step_limit {
                self.done = true;
                return;
            }
            let renamed = stored.renamed(self.fresh_generation());
            let Some(unified) = unify(&renamed.head, &goal, &subst) else { continue };
            let more = positions.clone().any(|(m2, c2)| modules[m2].clauses()[c2].head.indicator() == Some((name, arity)));
            if more {
                self.stack.push(ChoicePoint {
                    subst: subst.clone(),
                    rest: rest.clone(),
                    alt: Alt::Clauses { goal: goal.clone(), depth, module: m, clause: c + 1 },
                });
            }
            self.current = Some((push_all(&renamed.body, depth + 1, rest), unified));
            return;
        }
    }

    fn backtrack(&mut self) {
        while self.current.is_none() && !self.done {
            let Some(cp) = self.stack.pop() else { return };
            match cp.alt {
                Alt::Clauses { goal, depth, module, clause } => self.resolve(goal, depth, module, clause, cp.subst, cp.rest),
                Alt::Goals(goals) => self.current = Some((goals, cp.subst)),
                Alt::Between { target, next, hi } => {
                    if next < hi {
                        self.stack.push(ChoicePoint {
                            subst: cp.subst.clone(),
                            rest: cp.rest.clone(),
                            alt: Alt::Between { target: target.clone(), next: next + 1, hi },
                        });
                    }
                    let mut s = cp.subst;
                    s.unify_in_place(&target, &Term::int(next));
                    self.current = Some((cp.rest, s));
                }
            }
        }
    }
}

fn int_value(t: &Term, s: &Substitution) -> Result<i64, LogicError> {
    match eval(t, s)? {
        Number::Int(i) => Ok(i),
        other => Err(LogicError::Type { expected: "integer", found: other.to_string() }),
    }
}

impl Iterator for Solutions<'_> {
    type Item = Result<Substitution, LogicError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending_error.take() {
            self.done = true;
            return Some(Err(e));
        }
        loop {
            if self.done {
                return None;
            }
            if self.current.is_none() {
                self.backtrack();
            }
            let Some((goals, subst)) = self.current.take() else {
                self.done = true;
                return None;
            };
            match goals {
                None => return Some(Ok(subst.restrict(&self.vars))),
                Some(node) => {
                    if let Err(e) = self.step(node, subst) {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
            }
        }
    }
}
