//! Sample applications on the stormkit runtime: forklifts moving boxes in a
//! warehouse grid, and N-Queens solved by conversing agents.

pub mod config;
pub mod forks;
pub mod grid;
pub mod queens;
pub mod report;

pub use report::{Outcome, RunReport};
