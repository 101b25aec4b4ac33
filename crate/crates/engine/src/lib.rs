//! A Prolog-subset engine for ARC grid programs: reader, writer,
//! unification, SLD resolution with cut and negation, native grid
//! primitives, declarative execution traces and top-down bug localization.

pub mod apd;
mod arith;
mod bk;
mod builtins;
mod error;
mod library;
mod machine;
mod ops;
mod parse;
mod program;
mod term;
pub mod trace;
mod unify;
pub mod write;

pub use error::{EngineError, LimitKind, ParseError};
pub use parse::{parse_term, read_terms, ReadTerm};
pub use program::{flatten_conjunction, parse_program, parse_query, Clause, ClauseId, Program, Query};
pub use term::{atoms, Atom, Compound, Term, VarId};
pub use unify::{compare_terms, unify, Bindings};
pub use bk::{grid_to_term, term_to_grid};
pub use builtins::is_builtin;
pub use machine::{solve, solve_first, solve_traced, ResourceLimits, Solutions};
pub use trace::{
    render_trace, replay_check, ComputationTree, FailureReason, TraceError, TraceOutcome, TraceRenderOptions,
};
