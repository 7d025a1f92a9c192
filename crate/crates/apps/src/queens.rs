//! N-Queens as a conversation. Each queen owns one column and converses with
//! every other queen; columns to the left have priority. Positions flow
//! rightwards, nogoods flow leftwards, and a queen with no admissible row
//! resolves its conflicts into a nogood for the rightmost queen involved.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormkit_core::comms::Performative;
use stormkit_core::conv::{ConvEvent, ConvRule, ConversationClass, GuardCtx, HookCtx, MessageTemplate, Recipients};
use stormkit_core::kernel::{AgentSpec, BaseObject, Capabilities, Runtime};
use stormkit_core::{CoreError, Result};
use stormkit_logic::{LogicModule, MentalState, Substitution, Term, Var, BELIEFS};

use crate::report::{Outcome, RunReport};

pub const QUEENS_CLASS: &str = "queens";

pub const START: &str = "start";
pub const PROPOSING: &str = "proposing";
pub const WAITING: &str = "waiting";
pub const SATISFIED: &str = "satisfied";
pub const STUCK: &str = "stuck";

const RULES: &str = "
attacks(_, R, _, R).
attacks(C, R, J, RJ) :- R =\\= RJ, D is abs(R - RJ), D =:= abs(C - J).
culprit(R, J) :- col(C), view(J, RJ), attacks(C, R, J, RJ).
";

pub fn queen_name(col: i64) -> String {
    format!("q{col}")
}

/// A queen's local picture, read from its beliefs.
#[derive(Clone, Debug, PartialEq)]
struct Board {
    col: i64,
    size: i64,
    row: i64,
    view: BTreeMap<i64, i64>,
    nogoods: Vec<Vec<(i64, i64)>>,
}

fn int(t: &Term) -> Result<i64> {
    t.as_int().ok_or_else(|| CoreError::failed(&format!("{t} is not an integer")))
}

fn pos_term(c: i64, r: i64) -> Term {
    Term::compound("pos", vec![Term::int(c), Term::int(r)])
}

fn nogood_term(ng: &[(i64, i64)]) -> Term {
    Term::list(ng.iter().map(|&(c, r)| pos_term(c, r)))
}

fn parse_nogood(t: &Term) -> Result<Vec<(i64, i64)>> {
    let items = t.as_list().ok_or_else(|| CoreError::failed("nogood is not a list"))?;
    items
        .iter()
        .map(|p| match p.args() {
            [c, r] if p.functor() == Some("pos") => Ok((int(c)?, int(r)?)),
            _ => Err(CoreError::failed(&format!("bad nogood entry {p}"))),
        })
        .collect()
}

impl Board {
    fn read(ms: &MentalState) -> Result<Board> {
        let m = ms.module(BELIEFS).ok_or_else(|| CoreError::failed("no beliefs"))?;
        let (mut col, mut size, mut row) = (None, None, None);
        let mut view = BTreeMap::new();
        let mut nogoods = Vec::new();
        for c in m.clauses().iter().filter(|c| c.body.is_empty()) {
            let h = &c.head;
            match (h.functor(), h.args()) {
                (Some("col"), [a]) => col = Some(int(a)?),
                (Some("size"), [a]) => size = Some(int(a)?),
                (Some("row"), [a]) => row = Some(int(a)?),
                (Some("view"), [j, r]) => {
                    view.insert(int(j)?, int(r)?);
                }
                (Some("nogood"), [l]) => nogoods.push(parse_nogood(l)?),
                _ => {}
            }
        }
        let missing = || CoreError::failed("queen beliefs incomplete");
        Ok(Board { col: col.ok_or_else(missing)?, size: size.ok_or_else(missing)?, row: row.ok_or_else(missing)?, view, nogoods })
    }

    fn lower(&self) -> Term {
        Term::list((self.col + 1..=self.size).map(|c| Term::atom(queen_name(c))))
    }
}

/// What the queen does about an event.
#[derive(Clone, Debug, PartialEq)]
enum Step {
    Keep,
    Move(i64),
    Backtrack {
        nogood: Vec<(i64, i64)>,
        target: i64,
    },
    Unsolvable,
    /// The nogood does not match this queen's view; tell the sender where
    /// this queen stands.
    Resend(String),
}

/// The belief change an event implies, applied before the step is chosen.
#[derive(Clone, Debug, PartialEq)]
enum Update {
    View(i64, i64),
    Nogood(Vec<(i64, i64)>),
}

#[derive(Clone, Debug, PartialEq)]
struct Decision {
    update: Update,
    step: Step,
}

/// Columns whose queens attack `(col, r)`, found by the `culprit/2` query.
fn culprits(g: &GuardCtx<'_>, ms: &MentalState, r: i64) -> Result<Vec<i64>> {
    let goal = Term::compound("culprit", vec![Term::int(r), Term::var("J")]);
    let mut out = Vec::new();
    for s in g.cx.solve_in(ms, &goal, None, usize::MAX)? {
        out.push(int(&s.apply(&Term::var("J")))?);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// The smallest known reason row `r` is inadmissible, if it is.
fn justification(g: &GuardCtx<'_>, ms: &MentalState, b: &Board, r: i64) -> Result<Option<Vec<(i64, i64)>>> {
    let mut best: Option<Vec<(i64, i64)>> = None;
    let mut offer = |cand: Vec<(i64, i64)>| {
        let key = |v: &Vec<(i64, i64)>| v.iter().map(|e| e.0).max().unwrap_or(0);
        if best.as_ref().is_none_or(|b| key(&cand) < key(b)) {
            best = Some(cand);
        }
    };
    if let Some(&j) = culprits(g, ms, r)?.first() {
        offer(vec![(j, b.view[&j])]);
    }
    for ng in &b.nogoods {
        if !ng.contains(&(b.col, r)) {
            continue;
        }
        let rest: Vec<(i64, i64)> = ng.iter().copied().filter(|e| e.0 != b.col).collect();
        if rest.iter().all(|(c, v)| b.view.get(c) == Some(v)) {
            offer(rest);
        }
    }
    Ok(best)
}

fn recheck(g: &GuardCtx<'_>, ms: &MentalState, b: &Board) -> Result<Step> {
    let mut reasons = BTreeMap::new();
    for r in 1..=b.size {
        if let Some(j) = justification(g, ms, b, r)? {
            reasons.insert(r, j);
        }
    }
    if !reasons.contains_key(&b.row) {
        return Ok(Step::Keep);
    }
    let free = (1..=b.size).filter(|r| !reasons.contains_key(r)).min_by_key(|r| ((r - b.row).abs(), *r));
    if let Some(r) = free {
        return Ok(Step::Move(r));
    }
    let nogood: BTreeSet<(i64, i64)> = reasons.into_values().flatten().collect();
    match nogood.iter().map(|e| e.0).max() {
        None => Ok(Step::Unsolvable),
        Some(target) => Ok(Step::Backtrack { nogood: nogood.into_iter().collect(), target }),
    }
}

fn with_update(ms: &MentalState, b: &Board, u: &Update) -> Result<(MentalState, Board)> {
    let mut ms = ms.clone();
    let mut b = b.clone();
    match u {
        Update::View(j, r) => {
            ms.retract_clause(BELIEFS, &Term::compound("view", vec![Term::int(*j), Term::var("_")]))?;
            ms.assert_fact(BELIEFS, Term::compound("view", vec![Term::int(*j), Term::int(*r)]))?;
            b.view.insert(*j, *r);
        }
        Update::Nogood(ng) => {
            ms.assert_fact(BELIEFS, Term::compound("nogood", vec![nogood_term(ng)]))?;
            b.nogoods.push(ng.clone());
        }
    }
    Ok((ms, b))
}

/// Classifies a message or signal. `None` means no rule should accept it.
fn decide(g: &GuardCtx<'_>) -> Result<Option<Decision>> {
    let b = Board::read(g.state)?;
    let ConvEvent::Message(m) = g.event else { return Ok(None) };
    let content = m.content.to_term();
    match (content.functor(), content.args()) {
        (Some("position"), [j, r]) => {
            let (j, r) = (int(j)?, int(r)?);
            if j >= b.col {
                return Ok(None);
            }
            let update = Update::View(j, r);
            let (ms, b) = with_update(g.state, &b, &update)?;
            Ok(Some(Decision { step: recheck(g, &ms, &b)?, update }))
        }
        (Some("backtrack"), [_, l]) => {
            let ng = parse_nogood(l)?;
            if !ng.contains(&(b.col, b.row)) {
                // this queen has moved since; the sender hears about it in order
                return Ok(None);
            }
            let coherent = ng.iter().filter(|e| e.0 != b.col).all(|(c, v)| b.view.get(c) == Some(v));
            let update = Update::Nogood(ng);
            if !coherent {
                return Ok(Some(Decision { update, step: Step::Resend(m.sender.clone()) }));
            }
            let (ms, b2) = with_update(g.state, &b, &update)?;
            let step = match recheck(g, &ms, &b2)? {
                Step::Keep => Step::Resend(m.sender.clone()),
                s => s,
            };
            Ok(Some(Decision { update, step }))
        }
        _ => Ok(None),
    }
}

/// Guards of one class share the classification of the event at hand.
#[derive(Default)]
struct DecisionCache {
    entries: Mutex<BTreeMap<String, (String, Option<Decision>)>>,
}

impl DecisionCache {
    fn get(&self, g: &GuardCtx<'_>) -> Result<Option<Decision>> {
        let key = format!(
            "{}#{}#{}#{}",
            g.instance.history.len(),
            g.instance.ignored.len(),
            g.event.to_term(),
            g.state.module(BELIEFS).map_or(0, |m| m.clauses().len())
        );
        if let Some((k, d)) = self.entries.lock().get(&g.cx.name) {
            if *k == key {
                return Ok(d.clone());
            }
        }
        let d = decide(g)?;
        self.entries.lock().insert(g.cx.name.clone(), (key, d.clone()));
        Ok(d)
    }
}

fn var(name: &str) -> Var {
    Var::new(name)
}

fn bindings(pairs: Vec<(&str, Term)>) -> Substitution {
    pairs.into_iter().map(|(k, v)| (var(k), v)).collect()
}

fn update_term(u: &Update) -> Term {
    match u {
        Update::View(j, r) => Term::compound("view", vec![Term::int(*j), Term::int(*r)]),
        Update::Nogood(ng) => Term::compound("nogood", vec![nogood_term(ng)]),
    }
}

fn apply_update(h: &mut HookCtx<'_>) -> Result<()> {
    let u = h.local("Update").cloned().ok_or_else(|| CoreError::failed("no update bound"))?;
    match (u.functor(), u.args()) {
        (Some("view"), [j, _]) => {
            h.retract(BELIEFS, Term::compound("view", vec![j.clone(), Term::var("_")]))?;
            h.assert(BELIEFS, u.clone())?;
        }
        (Some("nogood"), [_]) => h.assert(BELIEFS, u.clone())?,
        _ => {}
    }
    Ok(())
}

fn set_row(h: &mut HookCtx<'_>) -> Result<()> {
    let r = h.local("New").cloned().ok_or_else(|| CoreError::failed("no row bound"))?;
    h.retract(BELIEFS, Term::compound("row", vec![Term::var("_")]))?;
    h.assert(BELIEFS, Term::compound("row", vec![r]))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Move,
    Keep,
    Backtrack,
    Unsolvable,
    Resend,
}

fn kind_of(s: &Step) -> Kind {
    match s {
        Step::Keep => Kind::Keep,
        Step::Move(_) => Kind::Move,
        Step::Backtrack { .. } => Kind::Backtrack,
        Step::Unsolvable => Kind::Unsolvable,
        Step::Resend(_) => Kind::Resend,
    }
}

fn step_guard(cache: Arc<DecisionCache>, want: Kind) -> impl Fn(&GuardCtx<'_>) -> Result<Option<Substitution>> + Send + Sync {
    move |g| {
        let Some(d) = cache.get(g)? else { return Ok(None) };
        if kind_of(&d.step) != want {
            return Ok(None);
        }
        let b = Board::read(g.state)?;
        let mut pairs = vec![("Update", update_term(&d.update)), ("C", Term::int(b.col)), ("Row", Term::int(b.row)), ("Lower", b.lower())];
        match d.step {
            Step::Move(r) => pairs.push(("New", Term::int(r))),
            Step::Backtrack { nogood, target } => {
                pairs.push(("Nogood", nogood_term(&nogood)));
                pairs.push(("Target", Term::atom(queen_name(target))));
            }
            Step::Resend(to) => pairs.push(("Sender", Term::atom(to))),
            Step::Keep | Step::Unsolvable => {}
        }
        Ok(Some(bindings(pairs)))
    }
}

fn satisfied_guard(g: &GuardCtx<'_>) -> Result<Option<Substitution>> {
    let ConvEvent::Signal(t) = g.event else { return Ok(None) };
    if t.functor() != Some("round_end") {
        return Ok(None);
    }
    let b = Board::read(g.state)?;
    if (1..b.col).any(|c| !b.view.contains_key(&c)) {
        return Ok(None);
    }
    Ok((recheck(g, g.state, &b)? == Step::Keep).then(Substitution::new))
}

fn tell(to: Recipients, content: &str) -> MessageTemplate {
    MessageTemplate::new(Performative::Tell, to, content)
}

/// The queens conversation class.
///
/// * M1 announces the initial row to the queens on the right.
/// * M2 moves to the nearest admissible row and announces it.
/// * M2w records a position that leaves the current row admissible.
/// * M3 accepts the placement once the system is quiet (`round_end`).
/// * M4 sends a nogood to the rightmost queen it blames.
/// * M4s has nobody left to blame: the instance is unsolvable.
/// * M5 answers an out-of-date nogood with this queen's position.
/// * M6 hears that another queen found the instance unsolvable.
pub fn queens_class() -> Result<ConversationClass> {
    let cache = Arc::new(DecisionCache::default());
    let lower = || Recipients::Term(Term::var("Lower"));
    let mut rules = vec![ConvRule::new("M1", START, PROPOSING)
        .guard_fn(|g| {
            let b = Board::read(g.state)?;
            Ok(matches!(g.event, ConvEvent::Start)
                .then(|| bindings(vec![("C", Term::int(b.col)), ("Row", Term::int(b.row)), ("Lower", b.lower())])))
        })
        .send(tell(lower(), "position(C, Row)"))];
    for from in [PROPOSING, WAITING] {
        let at = |n: &str| format!("{n}@{from}");
        rules.push(
            ConvRule::new(&at("M2"), from, PROPOSING)
                .guard_fn(step_guard(cache.clone(), Kind::Move))
                .before(|h| {
                    apply_update(h)?;
                    set_row(h)
                })
                .send(tell(lower(), "position(C, New)")),
        );
        rules.push(ConvRule::new(&at("M2w"), from, WAITING).guard_fn(step_guard(cache.clone(), Kind::Keep)).before(apply_update));
        rules.push(
            ConvRule::new(&at("M4"), from, WAITING)
                .guard_fn(step_guard(cache.clone(), Kind::Backtrack))
                .before(apply_update)
                .send(tell(Recipients::Term(Term::var("Target")), "backtrack(C, Nogood)")),
        );
        rules.push(
            ConvRule::new(&at("M4s"), from, STUCK)
                .guard_fn(step_guard(cache.clone(), Kind::Unsolvable))
                .before(apply_update)
                .send(tell(Recipients::Peers, "unsolvable")),
        );
        rules.push(
            ConvRule::new(&at("M5"), from, from)
                .guard_fn(step_guard(cache.clone(), Kind::Resend))
                .before(apply_update)
                .send(tell(Recipients::Term(Term::var("Sender")), "position(C, Row)")),
        );
        rules.push(ConvRule::new(&at("M3"), from, SATISFIED).guard_fn(satisfied_guard));
        rules.push(ConvRule::new(&at("M6"), from, STUCK).such_that("event(message(tell, _, unsolvable))"));
    }
    ConversationClass::new(QUEENS_CLASS, &[START, PROPOSING, WAITING, SATISFIED, STUCK], START, &[SATISFIED, STUCK], rules)
}

/// The beliefs a queen starts with: its column, the board size, its row and
/// the attack rules.
pub fn queen_beliefs(col: i64, n: i64, row: i64) -> Result<LogicModule> {
    Ok(LogicModule::from_text(BELIEFS, &format!("{RULES}col({col}).\nsize({n}).\nrow({row}).\n"))?)
}

/// Whether `rows[c]` (1-based rows, one per column) places no two queens
/// on a shared row or diagonal.
pub fn validate_queens(rows: &[i64]) -> bool {
    let n = rows.len() as i64;
    rows.iter().all(|r| (1..=n).contains(r))
        && (0..rows.len()).all(|i| (i + 1..rows.len()).all(|j| rows[i] != rows[j] && (rows[i] - rows[j]).abs() != (j - i) as i64))
}

#[derive(Clone, Debug)]
pub struct QueensOptions {
    pub n: usize,
    pub seed: u64,
    pub max_messages: u64,
    pub max_ticks: u64,
    pub timeout: Duration,
    pub deterministic: bool,
}

impl QueensOptions {
    pub fn new(n: usize, seed: u64) -> Self {
        QueensOptions { n, seed, max_messages: 10_000, max_ticks: 100_000, timeout: Duration::from_secs(60), deterministic: true }
    }
}

/// Result of a queens run: the report plus the placement when solved.
#[derive(Clone, Debug)]
pub struct QueensRun {
    pub report: RunReport,
    pub placement: Option<Vec<i64>>,
    pub states: Vec<String>,
}

/// Builds the runtime with one queen per column, initial rows drawn from the
/// seed, and every conversation spawned.
pub fn setup(opts: &QueensOptions) -> Result<Runtime> {
    let n = opts.n as i64;
    let mut rt = Runtime::new(opts.seed);
    rt.register_class(queens_class()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for c in 1..=n {
        let name = queen_name(c);
        let row = rng.gen_range(1..=n);
        let beliefs = queen_beliefs(c, n, row)?;
        let caps = Capabilities { communication: true, ..Capabilities::none() };
        let spec = AgentSpec::new(&name, caps).module(beliefs).conversation(QUEENS_CLASS);
        rt.create_agent(spec, BaseObject::new(name.as_str(), "queen"))?;
    }
    for c in 1..=n {
        let peers: Vec<String> = (1..=n).filter(|&p| p != c).map(queen_name).collect();
        let peers: Vec<&str> = peers.iter().map(String::as_str).collect();
        rt.spawn_conversation(&queen_name(c), QUEENS_CLASS, &peers)?;
    }
    Ok(rt)
}

fn states(rt: &Runtime, n: i64) -> Vec<String> {
    (1..=n)
        .map(|c| {
            rt.agent(&queen_name(c)).and_then(|h| h.conversations().into_iter().next()).map_or_else(|| "none".to_string(), |i| i.current)
        })
        .collect()
}

fn placement(rt: &Runtime, n: i64) -> Result<Vec<i64>> {
    (1..=n)
        .map(|c| {
            let h = rt.agent(&queen_name(c)).ok_or_else(|| CoreError::UnknownAgent(queen_name(c)))?;
            Ok(Board::read(&h.mental_state())?.row)
        })
        .collect()
}

/// One step of the outer loop: a scheduler round, or a threaded slice
/// followed by a round that tells whether anything is still moving.
fn step(rt: &mut Runtime, deterministic: bool) -> bool {
    if !deterministic {
        let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
        let flag = stop.clone();
        let timer = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(20));
            flag.store(true, std::sync::atomic::Ordering::SeqCst);
        });
        rt.scheduler_mut().run_threaded(stop, Duration::from_millis(1));
        let _ = timer.join();
    }
    rt.round().busy > 0
}

/// Runs the protocol until every queen is satisfied, one is stuck, or a
/// limit is hit.
pub fn run_queens(opts: &QueensOptions) -> Result<QueensRun> {
    let mut rt = setup(opts)?;
    drive(&mut rt, opts)
}

/// The outer loop of [`run_queens`] on a runtime built by [`setup`].
pub fn drive(rt: &mut Runtime, opts: &QueensOptions) -> Result<QueensRun> {
    let n = opts.n as i64;
    let started = Instant::now();
    let mut signalled = false;
    let mut seen = (u64::MAX, Vec::new());
    let outcome = loop {
        if rt.router.routed() > opts.max_messages {
            break Outcome::MessageLimit;
        }
        if rt.rounds() >= opts.max_ticks {
            break Outcome::TickLimit;
        }
        if started.elapsed() > opts.timeout {
            break Outcome::Timeout;
        }
        if step(rt, opts.deterministic) {
            continue;
        }
        let st = states(rt, n);
        let now = (rt.router.routed(), st.clone());
        if now != seen {
            signalled = false;
            seen = now;
        }
        if st.iter().any(|s| s == STUCK) {
            break Outcome::Unsolvable;
        }
        if st.iter().all(|s| s == SATISFIED) {
            break Outcome::Solved;
        }
        if signalled {
            break Outcome::Fault("quiet without agreement".into());
        }
        for c in 1..=n {
            rt.signal(&queen_name(c), None, Term::atom("round_end"))?;
        }
        signalled = true;
    };
    let mut placement = match outcome {
        Outcome::Solved => Some(self::placement(rt, n)?),
        _ => None,
    };
    let mut outcome = outcome;
    if let Some(p) = placement.take_if(|p| !validate_queens(p)) {
        outcome = Outcome::Fault(format!("invalid placement {p:?}"));
    }
    let snapshot = match &placement {
        Some(p) => format!("rows {}", p.iter().map(i64::to_string).collect::<Vec<_>>().join(",")),
        None => format!("states {}", states(rt, n).join(",")),
    };
    let report = RunReport { outcome, ticks: rt.rounds(), messages: rt.router.routed(), trace: rt.trace.render(), snapshot };
    Ok(QueensRun { report, placement, states: states(rt, n) })
}
