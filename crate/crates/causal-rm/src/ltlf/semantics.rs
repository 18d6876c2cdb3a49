//! Finite-trace semantics, formula progression, and empty-trace acceptance.
//!
//! The semantics is defined on negation normal form. On the empty trace:
//! `true`, `G`, `W` and weak-next hold; atoms, negated atoms, `X` and `U`
//! fail; boolean connectives recurse. On a non-empty trace the usual
//! one-step unrollings apply:
//!
//! ```text
//! G f    = f & WX(G f)
//! a U b  = b | (a & X(a U b))
//! a W b  = b | (a & WX(a W b))
//! ```
//!
//! Under this convention a negated atom is not the classical complement of
//! the atom on the empty trace (both fail there), which is why everything
//! here normalizes to NNF before evaluating.

use crate::alphabet::{Alphabet, Label};
use crate::ltlf::Formula;

/// Does the formula accept the empty trace?
pub fn empty_accepts(f: &Formula) -> bool {
    empty_accepts_nnf(&f.to_nnf())
}

fn empty_accepts_nnf(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::WeakNext(_) | Formula::Globally(_) | Formula::WeakUntil(_, _) => {
            true
        }
        Formula::False | Formula::Atom(_) | Formula::Not(_) | Formula::Next(_)
        | Formula::Until(_, _) => false,
        Formula::And(v) => v.iter().all(empty_accepts_nnf),
        Formula::Or(v) => v.iter().any(empty_accepts_nnf),
        Formula::Implies(_, _) => unreachable!("implication survived NNF"),
    }
}

/// Evaluates `f` on a finite trace of labels.
pub fn evaluate(f: &Formula, trace: &[Label]) -> bool {
    let mut props = f.atoms();
    for l in trace {
        props.extend(l.iter().cloned());
    }
    let alf = Alphabet::new(props).expect("trace alphabet within size cap");
    let word: Vec<u32> = trace
        .iter()
        .map(|l| alf.bits(l).expect("alphabet covers trace"))
        .collect();
    CompiledFormula::new(f, &alf).eval(&word)
}

/// One step of formula progression: a formula that holds on `t` exactly
/// when `f` holds on `label . t`. The result is canonical NNF, so the set
/// of formulas reachable by repeated progression is finite.
pub fn progress(f: &Formula, label: &Label) -> Formula {
    progress_nnf(&f.to_nnf(), &|a| label.contains(a))
}

/// Bitmask flavor of [`progress`] used by the compiler's tight loop.
pub fn progress_bits(f_nnf: &Formula, bits: u32, alf: &Alphabet) -> Formula {
    progress_nnf(f_nnf, &|a| {
        let i = alf.position(a).expect("atom declared in alphabet");
        bits & (1 << i) != 0
    })
}

fn progress_nnf(f: &Formula, holds: &dyn Fn(&str) -> bool) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(a) => {
            if holds(a) {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Not(g) => match &**g {
            Formula::Atom(a) => {
                if holds(a) {
                    Formula::False
                } else {
                    Formula::True
                }
            }
            _ => unreachable!("non-literal negation survived NNF"),
        },
        Formula::And(v) => Formula::and(v.iter().map(|g| progress_nnf(g, holds)).collect()),
        Formula::Or(v) => Formula::or(v.iter().map(|g| progress_nnf(g, holds)).collect()),
        Formula::Next(g) | Formula::WeakNext(g) => (**g).clone(),
        Formula::Globally(g) => {
            Formula::and(vec![progress_nnf(g, holds), f.clone()])
        }
        Formula::Until(a, b) | Formula::WeakUntil(a, b) => Formula::or(vec![
            progress_nnf(b, holds),
            Formula::and(vec![progress_nnf(a, holds), f.clone()]),
        ]),
        Formula::Implies(_, _) => unreachable!("implication survived NNF"),
    }
}

/// A formula flattened to a post-order node table for fast repeated
/// evaluation of many words over a fixed alphabet. This is the reference
/// evaluator used to cross-check the compiled automata: it works directly
/// off the recursive semantics, one dynamic-programming sweep from the end
/// of the word to the front.
pub struct CompiledFormula {
    nodes: Vec<Node>,
}

enum Node {
    True,
    False,
    Atom(u32),
    NotAtom(u32),
    And(Vec<usize>),
    Or(Vec<usize>),
    Next(usize),
    WeakNext(usize),
    Globally(usize),
    Until(usize, usize),
    WeakUntil(usize, usize),
}

impl CompiledFormula {
    pub fn new(f: &Formula, alf: &Alphabet) -> CompiledFormula {
        let mut nodes = Vec::new();
        push_nodes(&f.to_nnf(), alf, &mut nodes);
        CompiledFormula { nodes }
    }

    pub fn eval(&self, word: &[u32]) -> bool {
        let n = self.nodes.len();
        let mut next = vec![false; n];
        let mut cur = vec![false; n];
        // Table for the empty suffix.
        for (i, node) in self.nodes.iter().enumerate() {
            next[i] = match node {
                Node::True | Node::WeakNext(_) | Node::Globally(_) | Node::WeakUntil(_, _) => true,
                Node::False | Node::Atom(_) | Node::NotAtom(_) | Node::Next(_)
                | Node::Until(_, _) => false,
                Node::And(kids) => kids.iter().all(|&k| next[k]),
                Node::Or(kids) => kids.iter().any(|&k| next[k]),
            };
        }
        for &bits in word.iter().rev() {
            self.sweep(bits, &next, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        next[n - 1]
    }

    fn sweep(&self, bits: u32, next: &[bool], cur: &mut [bool]) {
        for (i, node) in self.nodes.iter().enumerate() {
            cur[i] = match node {
                Node::True => true,
                Node::False => false,
                Node::Atom(mask) => bits & mask != 0,
                Node::NotAtom(mask) => bits & mask == 0,
                Node::And(kids) => kids.iter().all(|&k| cur[k]),
                Node::Or(kids) => kids.iter().any(|&k| cur[k]),
                Node::Next(k) | Node::WeakNext(k) => next[*k],
                Node::Globally(k) => cur[*k] && next[i],
                Node::Until(a, b) | Node::WeakUntil(a, b) => cur[*b] || (cur[*a] && next[i]),
            };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Per-node truth values of the empty suffix, packed into a bitmask
    /// (node i -> bit i). Requires at most 64 nodes.
    pub fn empty_mask(&self) -> u64 {
        assert!(self.nodes.len() <= 64, "formula too large for mask evaluation");
        let mut next = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            next[i] = match node {
                Node::True | Node::WeakNext(_) | Node::Globally(_) | Node::WeakUntil(_, _) => true,
                Node::False | Node::Atom(_) | Node::NotAtom(_) | Node::Next(_)
                | Node::Until(_, _) => false,
                Node::And(kids) => kids.iter().all(|&k| next[k]),
                Node::Or(kids) => kids.iter().any(|&k| next[k]),
            };
        }
        pack(&next)
    }

    /// Truth values of the suffix `label . w` given the values `next` of the
    /// suffix `w`. Together with `empty_mask` this incrementally reproduces
    /// `eval` back to front, which lets callers share work across words with
    /// a common suffix.
    pub fn prepend_mask(&self, bits: u32, next: u64) -> u64 {
        let mut cur = 0u64;
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match node {
                Node::True => true,
                Node::False => false,
                Node::Atom(mask) => bits & mask != 0,
                Node::NotAtom(mask) => bits & mask == 0,
                Node::And(kids) => kids.iter().all(|&k| cur >> k & 1 != 0),
                Node::Or(kids) => kids.iter().any(|&k| cur >> k & 1 != 0),
                Node::Next(k) | Node::WeakNext(k) => next >> *k & 1 != 0,
                Node::Globally(k) => cur >> *k & 1 != 0 && next >> i & 1 != 0,
                Node::Until(a, b) | Node::WeakUntil(a, b) => {
                    cur >> *b & 1 != 0 || (cur >> *a & 1 != 0 && next >> i & 1 != 0)
                }
            };
            cur |= (v as u64) << i;
        }
        cur
    }

    /// Whether the word whose per-node values are `mask` satisfies the
    /// formula (the root is the last node).
    pub fn mask_holds(&self, mask: u64) -> bool {
        mask >> (self.nodes.len() - 1) & 1 != 0
    }
}

fn pack(row: &[bool]) -> u64 {
    row.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i)
}

fn push_nodes(f: &Formula, alf: &Alphabet, out: &mut Vec<Node>) -> usize {
    let node = match f {
        Formula::True => Node::True,
        Formula::False => Node::False,
        Formula::Atom(a) => Node::Atom(1 << alf.position(a).expect("atom in alphabet")),
        Formula::Not(g) => match &**g {
            Formula::Atom(a) => {
                Node::NotAtom(1 << alf.position(a).expect("atom in alphabet"))
            }
            _ => unreachable!("non-literal negation survived NNF"),
        },
        Formula::And(v) => Node::And(v.iter().map(|g| push_nodes(g, alf, out)).collect()),
        Formula::Or(v) => Node::Or(v.iter().map(|g| push_nodes(g, alf, out)).collect()),
        Formula::Next(g) => Node::Next(push_nodes(g, alf, out)),
        Formula::WeakNext(g) => Node::WeakNext(push_nodes(g, alf, out)),
        Formula::Globally(g) => Node::Globally(push_nodes(g, alf, out)),
        Formula::Until(a, b) => {
            Node::Until(push_nodes(a, alf, out), push_nodes(b, alf, out))
        }
        Formula::WeakUntil(a, b) => {
            Node::WeakUntil(push_nodes(a, alf, out), push_nodes(b, alf, out))
        }
        Formula::Implies(_, _) => unreachable!("implication survived NNF"),
    };
    out.push(node);
    out.len() - 1
}
