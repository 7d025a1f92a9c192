//! Agent runtime: skill interception, perception, reaction, deliberation,
//! messaging and conversations.

pub mod bus;
pub mod comms;
pub mod conv;
pub mod deliberate;
pub mod effect;
pub mod error;
pub mod kernel;
pub mod percept;
pub mod react;
pub mod sched;
pub mod trace;

pub use error::{CoreError, Result};
