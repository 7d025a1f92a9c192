//! Breadth-first forward search over belief states, filling the slot for a
//! general-purpose planner.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use stormkit_logic::{Clause, Engine, LogicModule, MentalState, Term, BELIEFS};

use super::{achieve_goal, drop_goal, payload_ids, publish_plan, ActionStep, GoalId, GoalStatus, KnowledgeSource, PlanId};
use crate::bus::{EventKind, InternalEvent};
use crate::effect::Effect;
use crate::error::{CoreError, Result};
use crate::kernel::{module_order, AgentContext};

pub const DEFAULT_NODE_BUDGET: usize = 10_000;

/// An action with variables: its precondition is a goal list solved against
/// the state, and each solution yields one ground successor.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSchema {
    pub selector: String,
    pub args: Vec<Term>,
    pub precondition: Vec<Term>,
    pub effects: Vec<Effect>,
}

impl ActionSchema {
    pub fn new(selector: &str, args: Vec<Term>) -> Self {
        ActionSchema { selector: selector.to_string(), args, precondition: Vec::new(), effects: Vec::new() }
    }

    pub fn when(mut self, goals: &str) -> Self {
        self.precondition = stormkit_logic::parse_query(goals).expect("precondition parses");
        self
    }

    pub fn effect(mut self, e: Effect) -> Self {
        self.effects.push(e);
        self
    }
}

struct Node {
    facts: Vec<Term>,
    parent: Option<(usize, ActionStep)>,
}

fn state_with(base: &MentalState, rules: &[Clause], facts: &[Term]) -> MentalState {
    let mut ms = base.clone();
    let mut m = LogicModule::new(BELIEFS);
    m.extend(rules.iter().cloned());
    m.extend(facts.iter().map(|f| Clause::fact(f.clone()).expect("ground fact")));
    ms.insert_module(m);
    ms
}

fn key(facts: &[Term]) -> BTreeSet<String> {
    facts.iter().map(|f| f.to_string()).collect()
}

/// Shortest action sequence from `initial` to a state where `goal` is
/// provable, or `NoPlanFound` once `budget` nodes have been expanded.
pub fn run_planner(
    goal: &Term,
    initial: &MentalState,
    schemas: &[ActionSchema],
    engine: &Engine,
    budget: usize,
) -> Result<Vec<ActionStep>> {
    let (rules, facts): (Vec<Clause>, Vec<Clause>) =
        initial.module(BELIEFS).map(|m| m.clauses().to_vec()).unwrap_or_default().into_iter().partition(|c| !c.is_fact());
    let start: Vec<Term> = facts.into_iter().map(|c| c.head).collect();
    let order = module_order(initial);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let provable = |facts: &[Term]| -> Result<bool> {
        let ms = state_with(initial, &rules, facts);
        Ok(engine.solve_first(goal, &ms, &order, None)?.is_some())
    };
    if provable(&start)? {
        return Ok(Vec::new());
    }
    let mut nodes = vec![Node { facts: start.clone(), parent: None }];
    let mut seen = BTreeSet::from([key(&start)]);
    let mut frontier = VecDeque::from([0usize]);
    let mut expanded = 0usize;
    while let Some(i) = frontier.pop_front() {
        if expanded >= budget {
            break;
        }
        expanded += 1;
        let ms = state_with(initial, &rules, &nodes[i].facts);
        for schema in schemas {
            let solutions = engine.solve_goals(&schema.precondition, &ms, &order, None);
            for s in solutions {
                let s = s?;
                let args: Vec<Term> = schema.args.iter().map(|a| s.apply(a)).collect();
                if !args.iter().all(Term::is_ground) {
                    continue;
                }
                let effects: Vec<Effect> = schema.effects.iter().map(|e| e.instantiate(&s)).collect();
                let mut next = nodes[i].facts.clone();
                for e in &effects {
                    e.apply_to_facts(&mut next);
                }
                if !seen.insert(key(&next)) {
                    continue;
                }
                let preconditions = schema
                    .precondition
                    .iter()
                    .map(|p| s.apply(p))
                    .filter(|p| p.indicator().is_some_and(|(n, a)| !engine.is_builtin(n, a)) && p.is_ground())
                    .collect();
                let step = ActionStep { selector: schema.selector.clone(), args, preconditions, effects };
                let goal_reached = provable(&next)?;
                nodes.push(Node { facts: next, parent: Some((i, step)) });
                let j = nodes.len() - 1;
                if goal_reached {
                    return Ok(unwind(&nodes, j));
                }
                frontier.push_back(j);
            }
        }
    }
    Err(CoreError::NoPlanFound { expanded })
}

fn unwind(nodes: &[Node], mut j: usize) -> Vec<ActionStep> {
    let mut steps = Vec::new();
    while let Some((parent, step)) = &nodes[j].parent {
        steps.push(step.clone());
        j = *parent;
    }
    steps.reverse();
    steps
}

/// Plans whole courses of action for the goals it accepts, replanning when
/// a plan finishes without achieving its goal.
pub struct PlannerKs {
    id: String,
    schemas: Vec<ActionSchema>,
    functors: Vec<String>,
    budget: usize,
    active: BTreeMap<GoalId, (Option<PlanId>, u32)>,
}

impl PlannerKs {
    pub fn new(id: &str, schemas: Vec<ActionSchema>) -> Self {
        PlannerKs { id: id.to_string(), schemas, functors: Vec::new(), budget: DEFAULT_NODE_BUDGET, active: BTreeMap::new() }
    }

    /// Restricts the goals taken on to these functors.
    pub fn for_goals(mut self, functors: &[&str]) -> Self {
        self.functors = functors.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn budget(mut self, nodes: usize) -> Self {
        self.budget = nodes;
        self
    }

    fn attempt(&mut self, goal: GoalId, cx: &AgentContext) -> Result<()> {
        let Some(g) = cx.board.goal(goal) else { return Ok(()) };
        if g.status != GoalStatus::Committed {
            self.active.remove(&goal);
            return Ok(());
        }
        if cx.holds(&g.expression)? {
            self.active.remove(&goal);
            achieve_goal(cx, goal);
            return Ok(());
        }
        let tries = self.active.get(&goal).map_or(0, |(_, n)| *n);
        if tries >= super::BLOCK_AFTER {
            self.active.remove(&goal);
            super::block_goal(cx, goal);
            return Ok(());
        }
        let state = cx.store.snapshot();
        match run_planner(&g.expression, &state, &self.schemas, &cx.engine, self.budget) {
            Ok(steps) => {
                let pid = publish_plan(cx, goal, steps, &self.id);
                self.active.insert(goal, (Some(pid), tries + 1));
                Ok(())
            }
            Err(e) => {
                self.active.remove(&goal);
                drop_goal(cx, goal);
                Err(e)
            }
        }
    }
}

impl KnowledgeSource for PlannerKs {
    fn id(&self) -> &str {
        &self.id
    }

    fn subscriptions(&self) -> Vec<EventKind> {
        vec![EventKind::GoalCommitted, EventKind::ActionExecuted, EventKind::PlanInvalidated]
    }

    fn on_event(&mut self, e: &InternalEvent, cx: &AgentContext) -> Result<()> {
        match e.kind {
            EventKind::GoalCommitted => {
                let args = e.payload.args();
                let (Some(id), Some(expr)) = (args.first().and_then(GoalId::from_term), args.get(1)) else {
                    return Ok(());
                };
                let wanted = self.functors.is_empty() || expr.functor().is_some_and(|f| self.functors.iter().any(|w| w == f));
                if wanted {
                    self.active.insert(id, (None, 0));
                    self.attempt(id, cx)?;
                }
            }
            EventKind::ActionExecuted | EventKind::PlanInvalidated => {
                let finished = e.kind == EventKind::PlanInvalidated || e.payload.args().get(3).and_then(Term::as_atom) == Some("done");
                if let (true, Some((Some(pid), goal))) = (finished, payload_ids(&e.payload)) {
                    if self.active.get(&goal).is_some_and(|(p, _)| *p == Some(pid)) {
                        self.attempt(goal, cx)?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}
