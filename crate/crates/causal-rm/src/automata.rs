//! Deterministic finite automata over label alphabets.
//!
//! The transition function is total and stored densely per label bitmask.
//! States from which no accepting state is reachable are flagged as
//! rejecting sinks; these mark language violations that can never be
//! repaired and drive the punished transitions of the product machine.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError, Label};

#[derive(Debug, Error)]
pub enum AutomataError {
    #[error("word label {0}: {1}")]
    BadLabel(usize, AlphabetError),
}

#[derive(Debug, Clone)]
pub struct CausalDfa {
    alphabet: Alphabet,
    initial: usize,
    /// `delta[state][label_bits]` — total over states and labels.
    delta: Vec<Vec<usize>>,
    accepting: Vec<bool>,
    /// Derived: no accepting state is reachable from here.
    rejecting_sink: Vec<bool>,
}

impl CausalDfa {
    pub fn new(
        alphabet: Alphabet,
        initial: usize,
        delta: Vec<Vec<usize>>,
        accepting: Vec<bool>,
    ) -> CausalDfa {
        let n = delta.len();
        assert_eq!(accepting.len(), n, "accepting flags must cover all states");
        assert!(initial < n, "initial state out of range");
        for row in &delta {
            assert_eq!(row.len(), alphabet.n_labels(), "delta row width mismatch");
            assert!(row.iter().all(|&q| q < n), "delta target out of range");
        }
        let rejecting_sink = rejecting_sinks(&delta, &accepting);
        CausalDfa {
            alphabet,
            initial,
            delta,
            accepting,
            rejecting_sink,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn is_rejecting_sink(&self, q: usize) -> bool {
        self.rejecting_sink[q]
    }

    pub fn next(&self, q: usize, label_bits: u32) -> usize {
        self.delta[q][label_bits as usize]
    }

    /// Runs the automaton, returning the state sequence including the
    /// initial state (length `word.len() + 1`). Labels using undeclared
    /// propositions are an error.
    pub fn run(&self, word: &[Label]) -> Result<Vec<usize>, AutomataError> {
        let mut states = Vec::with_capacity(word.len() + 1);
        let mut q = self.initial;
        states.push(q);
        for (i, l) in word.iter().enumerate() {
            let bits = self
                .alphabet
                .bits(l)
                .map_err(|e| AutomataError::BadLabel(i, e))?;
            q = self.next(q, bits);
            states.push(q);
        }
        Ok(states)
    }

    pub fn accepts(&self, word: &[Label]) -> Result<bool, AutomataError> {
        Ok(self.accepting[*self.run(word)?.last().unwrap()])
    }

    /// The state reached from the initial state on `word`.
    pub fn state_after(&self, word: &[Label]) -> Result<usize, AutomataError> {
        Ok(*self.run(word)?.last().unwrap())
    }

    /// Language-preserving minimization: drops unreachable states, then
    /// merges states by partition refinement starting from the
    /// accepting/rejecting split. All dead rejecting states collapse into
    /// at most one sink.
    pub fn minimize(&self) -> CausalDfa {
        let n = self.n_states();
        let n_labels = self.alphabet.n_labels();
        // Reachable states, renumbered in BFS order for determinism.
        let mut order = Vec::with_capacity(n);
        let mut index = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        index[self.initial] = 0;
        order.push(self.initial);
        queue.push_back(self.initial);
        while let Some(q) = queue.pop_front() {
            for &q2 in &self.delta[q] {
                if index[q2] == usize::MAX {
                    index[q2] = order.len();
                    order.push(q2);
                    queue.push_back(q2);
                }
            }
        }
        let m = order.len();
        // Partition refinement on the reachable part.
        let mut class: Vec<usize> = order
            .iter()
            .map(|&q| usize::from(self.accepting[q]))
            .collect();
        loop {
            let mut sig_ids: std::collections::HashMap<Vec<usize>, usize> =
                std::collections::HashMap::new();
            let mut next_class = vec![0usize; m];
            for i in 0..m {
                let q = order[i];
                let mut sig = Vec::with_capacity(n_labels + 1);
                sig.push(class[i]);
                for &q2 in &self.delta[q] {
                    sig.push(class[index[q2]]);
                }
                let fresh = sig_ids.len();
                next_class[i] = *sig_ids.entry(sig).or_insert(fresh);
            }
            if next_class == class {
                break;
            }
            class = next_class;
        }
        // Rebuild with one representative per class, numbered by first
        // appearance in BFS order (so the initial state is state 0).
        let n_classes = class.iter().max().map(|&c| c + 1).unwrap_or(0);
        let mut rep = vec![usize::MAX; n_classes];
        let mut class_order = Vec::with_capacity(n_classes);
        let mut renum = vec![usize::MAX; n_classes];
        for i in 0..m {
            let c = class[i];
            if rep[c] == usize::MAX {
                rep[c] = order[i];
                renum[c] = class_order.len();
                class_order.push(c);
            }
        }
        let delta: Vec<Vec<usize>> = class_order
            .iter()
            .map(|&c| {
                self.delta[rep[c]]
                    .iter()
                    .map(|&q2| renum[class[index[q2]]])
                    .collect()
            })
            .collect();
        let accepting = class_order
            .iter()
            .map(|&c| self.accepting[rep[c]])
            .collect();
        CausalDfa::new(self.alphabet.clone(), renum[class[0]], delta, accepting)
    }

    /// Synchronous product over the union alphabet; each factor reads the
    /// projection of the joint label onto its own alphabet. The result
    /// accepts when both factors accept and keeps the full state grid
    /// (minimize afterwards if compactness matters).
    pub fn compose_parallel(&self, other: &CausalDfa) -> CausalDfa {
        let alphabet = self.alphabet.union(&other.alphabet);
        let p1 = alphabet.projection_table(&self.alphabet);
        let p2 = alphabet.projection_table(&other.alphabet);
        let n2 = other.n_states();
        let pair = |q1: usize, q2: usize| q1 * n2 + q2;
        let mut delta = Vec::with_capacity(self.n_states() * n2);
        let mut accepting = Vec::with_capacity(self.n_states() * n2);
        for q1 in 0..self.n_states() {
            for q2 in 0..n2 {
                let row = (0..alphabet.n_labels())
                    .map(|bits| {
                        pair(
                            self.delta[q1][p1[bits] as usize],
                            other.delta[q2][p2[bits] as usize],
                        )
                    })
                    .collect();
                delta.push(row);
                accepting.push(self.accepting[q1] && other.accepting[q2]);
            }
        }
        CausalDfa::new(alphabet, pair(self.initial, other.initial), delta, accepting)
    }

    /// Exact language equality, by reachability over the paired automaton.
    pub fn language_equiv(&self, other: &CausalDfa) -> bool {
        self.distinguishing_word(other).is_none()
    }

    /// A shortest word accepted by exactly one of the two automata, if any.
    pub fn distinguishing_word(&self, other: &CausalDfa) -> Option<Vec<Label>> {
        let alphabet = self.alphabet.union(&other.alphabet);
        let p1 = alphabet.projection_table(&self.alphabet);
        let p2 = alphabet.projection_table(&other.alphabet);
        let n2 = other.n_states();
        let mut seen = vec![false; self.n_states() * n2];
        // (pair, parent index in trail, label bits leading here)
        let mut trail: Vec<(usize, usize, u32)> = Vec::new();
        let mut queue = VecDeque::new();
        let start = self.initial * n2 + other.initial;
        seen[start] = true;
        trail.push((start, usize::MAX, 0));
        queue.push_back(0usize);
        while let Some(t) = queue.pop_front() {
            let pair = trail[t].0;
            let (q1, q2) = (pair / n2, pair % n2);
            if self.accepting[q1] != other.accepting[q2] {
                let mut word = Vec::new();
                let mut i = t;
                while trail[i].1 != usize::MAX {
                    word.push(alphabet.label(trail[i].2));
                    i = trail[i].1;
                }
                word.reverse();
                return Some(word);
            }
            for bits in 0..alphabet.n_labels() as u32 {
                let next = self.delta[q1][p1[bits as usize] as usize] * n2
                    + other.delta[q2][p2[bits as usize] as usize];
                if !seen[next] {
                    seen[next] = true;
                    trail.push((next, t, bits));
                    queue.push_back(trail.len() - 1);
                }
            }
        }
        None
    }

    /// Plain-text export: one `state` line per state, then `edge` lines
    /// with the guard of each (from, to) pair as a disjunction of full
    /// conjunctions over the alphabet.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ap: {}", self.alphabet);
        for q in 0..self.n_states() {
            let mut line = format!("state {q}");
            if self.accepting[q] {
                line.push_str(" accepting");
            }
            if q == self.initial {
                line.push_str(" initial");
            }
            let _ = writeln!(out, "{line}");
        }
        for (q, guard, q2) in self.edge_guards() {
            let _ = writeln!(out, "edge {q} \"{guard}\" {q2}");
        }
        out
    }

    /// Graphviz export with the same edge grouping as [`Self::to_text`].
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  init [shape=point];\n");
        for q in 0..self.n_states() {
            let shape = if self.accepting[q] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  q{q} [shape={shape}, label=\"{q}\"];");
        }
        let _ = writeln!(out, "  init -> q{};", self.initial);
        for (q, guard, q2) in self.edge_guards() {
            let escaped = guard.replace('"', "\\\"");
            let _ = writeln!(out, "  q{q} -> q{q2} [label=\"{escaped}\"];");
        }
        out.push_str("}\n");
        out
    }

    fn edge_guards(&self) -> Vec<(usize, String, usize)> {
        let n_labels = self.alphabet.n_labels();
        let mut edges = Vec::new();
        for q in 0..self.n_states() {
            let mut targets: Vec<(usize, Vec<u32>)> = Vec::new();
            for bits in 0..n_labels as u32 {
                let q2 = self.delta[q][bits as usize];
                match targets.iter_mut().find(|(t, _)| *t == q2) {
                    Some((_, v)) => v.push(bits),
                    None => targets.push((q2, vec![bits])),
                }
            }
            for (q2, labels) in targets {
                let guard = if labels.len() == n_labels {
                    "true".to_string()
                } else {
                    labels
                        .iter()
                        .map(|&b| {
                            if self.alphabet.is_empty() {
                                "true".to_string()
                            } else {
                                format!("({})", self.alphabet.minterm(b))
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(" | ")
                };
                edges.push((q, guard, q2));
            }
        }
        edges
    }
}

/// States from which no accepting state is reachable, computed by a reverse
/// sweep from the accepting set.
fn rejecting_sinks(delta: &[Vec<usize>], accepting: &[bool]) -> Vec<bool> {
    let n = delta.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (q, row) in delta.iter().enumerate() {
        for &q2 in row {
            preds[q2].push(q);
        }
    }
    let mut live = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&q| accepting[q]).collect();
    for &q in &queue {
        live[q] = true;
    }
    while let Some(q) = queue.pop_front() {
        for &p in &preds[q] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    live.iter().map(|&l| !l).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::label;

    /// Two states over one prop: accept words with an even number of `a`s.
    fn parity_dfa() -> CausalDfa {
        let alf = Alphabet::new(["a"]).unwrap();
        CausalDfa::new(alf, 0, vec![vec![0, 1], vec![1, 0]], vec![true, false])
    }

    #[test]
    fn run_tracks_states() {
        let d = parity_dfa();
        let word = vec![label(["a"]), label::<[&str; 0], &str>([]), label(["a"])];
        assert_eq!(d.run(&word).unwrap(), vec![0, 1, 1, 0]);
        assert!(d.accepts(&word).unwrap());
    }

    #[test]
    fn rejecting_sink_detection() {
        let alf = Alphabet::new(["a"]).unwrap();
        // State 2 is a dead trap; state 1 can still recover to 0.
        let d = CausalDfa::new(
            alf,
            0,
            vec![vec![0, 1], vec![0, 2], vec![2, 2]],
            vec![true, false, false],
        );
        assert!(!d.is_rejecting_sink(0));
        assert!(!d.is_rejecting_sink(1));
        assert!(d.is_rejecting_sink(2));
    }

    #[test]
    fn minimize_merges_dead_states() {
        let alf = Alphabet::new(["a"]).unwrap();
        // Two distinct dead traps plus a redundant copy of the start state.
        let d = CausalDfa::new(
            alf,
            0,
            vec![
                vec![4, 1],
                vec![0, 2],
                vec![3, 2],
                vec![3, 3],
                vec![4, 1],
            ],
            vec![true, false, false, false, true],
        );
        let m = d.minimize();
        assert!(m.language_equiv(&d));
        assert_eq!(m.n_states(), 3);
        assert_eq!(m.minimize().n_states(), 3);
    }
}
