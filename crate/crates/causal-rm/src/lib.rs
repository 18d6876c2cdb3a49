//! Reward machines with temporal-causal pruning.
//!
//! The crate turns statements of temporal causality ("if the agent sees
//! `s`, it will not see `o` before `f`") into deterministic automata,
//! multiplies them with a task's probabilistic reward machine, and prunes
//! the product so that a reinforcement learner stops wasting steps on
//! futures the causal structure already rules out. Modules:
//!
//! * [`alphabet`]: proposition sets and dense label encodings.
//! * [`ltlf`]: finite-trace temporal formulas, semantics, progression, and
//!   compilation to automata.
//! * [`automata`]: deterministic automata, minimization, products,
//!   language equivalence.
//! * [`machines`]: probabilistic reward machines, value iteration, and the
//!   causal product construction.
//! * [`envs`]: labeled gridworlds with one-way doors, sinks, and stochastic
//!   entry relocation.
//! * [`learn`]: tabular Q-learning with per-step machine-wide updates, and
//!   an exact solver for the cross product.
//! * [`harness`]: experiment configs, deterministic multi-seed runs, CSV
//!   output.

pub mod alphabet;
pub mod automata;
pub mod envs;
pub mod harness;
pub mod learn;
pub mod ltlf;
pub mod machines;
