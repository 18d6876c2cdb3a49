//! Formula-to-automaton compilation by progression.
//!
//! States are canonical NNF formulas; the successor of a state under a
//! label is its progression, and a state accepts when it accepts the empty
//! trace. Canonicalization (sorted, deduplicated and/or with constant
//! folding) keeps the reachable set finite; a state cap guards against
//! pathological inputs.

use std::collections::HashMap;

use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::automata::CausalDfa;
use crate::ltlf::semantics::{empty_accepts, progress_bits};
use crate::ltlf::{Formula, Tlcd};

pub const DEFAULT_MAX_STATES: usize = 10_000;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("formula mentions atom `{0}` not declared in the alphabet")]
    UndeclaredAtom(String),
    #[error("state explosion: more than {0} states reachable by progression")]
    StateExplosion(usize),
}

/// Compiles a formula into a deterministic automaton over `alphabet`.
pub fn compile_to_dfa(
    f: &Formula,
    alphabet: &Alphabet,
    max_states: usize,
) -> Result<CausalDfa, CompileError> {
    for a in f.atoms() {
        if !alphabet.contains(&a) {
            return Err(CompileError::UndeclaredAtom(a));
        }
    }
    let n_labels = alphabet.n_labels();
    let init = f.to_nnf();
    let mut ids: HashMap<Formula, usize> = HashMap::new();
    let mut states: Vec<Formula> = Vec::new();
    let mut delta: Vec<Vec<usize>> = Vec::new();
    ids.insert(init.clone(), 0);
    states.push(init);
    let mut frontier = 0;
    while frontier < states.len() {
        let state = states[frontier].clone();
        let mut row = Vec::with_capacity(n_labels);
        for bits in 0..n_labels as u32 {
            let succ = progress_bits(&state, bits, alphabet);
            let next_id = match ids.get(&succ) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= max_states {
                        return Err(CompileError::StateExplosion(max_states));
                    }
                    ids.insert(succ.clone(), id);
                    states.push(succ);
                    id
                }
            };
            row.push(next_id);
        }
        delta.push(row);
        frontier += 1;
    }
    let accepting = states.iter().map(empty_accepts).collect();
    Ok(CausalDfa::new(alphabet.clone(), 0, delta, accepting))
}

/// Compiles a cause/effect diagram's requirement formula and minimizes the
/// result. An edgeless diagram yields the one-state all-accepting automaton.
pub fn compile_tlcd(cd: &Tlcd, max_states: usize) -> Result<CausalDfa, CompileError> {
    let dfa = compile_to_dfa(&cd.to_formula(), cd.alphabet(), max_states)?;
    Ok(dfa.minimize())
}
