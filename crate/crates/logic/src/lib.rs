//! Embedded logic engine used for agent mental states, situation
//! definitions, reaction preconditions and query answering.
//!
//! Terms, clauses and named modules are plain data; [`Engine`] runs SLD
//! resolution over a [`MentalState`] snapshot and reaches host objects only
//! through the [`HostBridge`] trait (`send/4`, `newInstance/3`,
//! `baseObject/1`). Occurs-check is always on.

mod builtins;
mod db;
mod error;
mod parse;
mod solve;
mod subst;
mod term;

pub use builtins::{eval, BuiltinFn, CallContext, ConstructorFn, Constructors, HostBridge};
pub use db::{Clause, LogicModule, MentalState, BELIEFS, GOALS, SITUATIONS};
pub use error::LogicError;
pub use parse::{parse_clause, parse_clauses, parse_query, parse_term};
pub use solve::{solve, Engine, Solutions, SolveOptions, DEFAULT_DEPTH_LIMIT, DEFAULT_STEP_LIMIT};
pub use subst::{unify, Substitution};
pub use term::{atom_is_plain, HostValue, Number, Term, Var, LIST_CONS, LIST_NIL, VOID};
