//! Finite-trace temporal logic: syntax, semantics, progression, and
//! compilation to deterministic automata.

mod compile;
mod formula;
mod parse;
pub mod semantics;

pub use compile::{compile_tlcd, compile_to_dfa, CompileError, DEFAULT_MAX_STATES};
pub use formula::Formula;
pub use parse::{parse_formula, ParseError, Tlcd};
pub use semantics::{empty_accepts, evaluate, progress, CompiledFormula};
