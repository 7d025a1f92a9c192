//! Logical clock and the line-oriented run trace (`tick|agent|kind|payload`).

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

/// Shared logical time. The deterministic scheduler sets it to the round
/// number; free-running mode advances it on every recorded event.
#[derive(Clone, Debug, Default)]
pub struct Clock(Arc<AtomicU64>);

impl Clock {
    pub fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn set(&self, tick: u64) {
        self.0.store(tick, Ordering::SeqCst);
    }

    pub fn advance(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub tick: u64,
    pub agent: String,
    pub kind: String,
    pub payload: String,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|{}", self.tick, self.agent, self.kind, self.payload.replace('\n', " "))
    }
}

impl TraceLine {
    pub fn parse(line: &str) -> Option<TraceLine> {
        let mut parts = line.splitn(4, '|');
        let tick = parts.next()?.parse().ok()?;
        let agent = parts.next()?.to_string();
        let kind = parts.next()?.to_string();
        let payload = parts.next()?.to_string();
        Some(TraceLine { tick, agent, kind, payload })
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    lines: Arc<Mutex<Vec<TraceLine>>>,
    clock: Clock,
}

impl Trace {
    pub fn new(clock: Clock) -> Self {
        Trace { lines: Arc::default(), clock }
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn record(&self, agent: &str, kind: &str, payload: impl fmt::Display) {
        let line = TraceLine { tick: self.clock.now(), agent: agent.to_string(), kind: kind.to_string(), payload: payload.to_string() };
        tracing::trace!(target: "stormkit::trace", "{line}");
        self.lines.lock().push(line);
    }

    pub fn lines(&self) -> Vec<TraceLine> {
        self.lines.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.lines.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, kind: &str) -> usize {
        self.lines.lock().iter().filter(|l| l.kind == kind).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in self.lines.lock().iter() {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.render().as_bytes())?;
        f.flush()
    }
}
