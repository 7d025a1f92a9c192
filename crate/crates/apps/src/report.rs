//! What a run ends with.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every goal of the scenario holds.
    Solved,
    /// The scenario has no solution, and the agents established it.
    Unsolvable,
    TickLimit,
    MessageLimit,
    Timeout,
    Fault(String),
}

impl Outcome {
    /// 0 on success, 2 when a limit was hit or the problem is unsolvable,
    /// 1 on a fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Solved => 0,
            Outcome::Fault(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Solved => f.write_str("solved"),
            Outcome::Unsolvable => f.write_str("unsolvable"),
            Outcome::TickLimit => f.write_str("tick limit exceeded"),
            Outcome::MessageLimit => f.write_str("message limit exceeded"),
            Outcome::Timeout => f.write_str("timeout"),
            Outcome::Fault(m) => write!(f, "fault: {m}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub ticks: u64,
    pub messages: u64,
    /// Rendered trace, one `tick|agent|kind|payload` line per event.
    pub trace: String,
    /// Final world state in one line.
    pub snapshot: String,
}

impl RunReport {
    pub fn summary(&self) -> String {
        format!("outcome: {}\nticks: {}\nmessages: {}\nsnapshot: {}\n", self.outcome, self.ticks, self.messages, self.snapshot)
    }
}
