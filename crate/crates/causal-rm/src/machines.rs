//! Probabilistic reward machines and the causal product construction.
//!
//! A reward machine reads one label per step and responds with a stochastic
//! jump and a scalar reward. The file format keeps transitions guarded by
//! propositional formulas; internally everything is compiled to a dense
//! per-label table. The product of a machine with a causal automaton
//! mirrors the machine's rewards except on transitions whose automaton
//! component falls into a rejecting sink, which are punished with a reward
//! low enough that an optimal policy can never prefer them.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::automata::CausalDfa;
use crate::ltlf::{parse_formula, Formula};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("state {state} label {label}: no guard matches")]
    MissingGuard { state: usize, label: String },
    #[error("state {state} label {label}: guards `{a}` and `{b}` both match")]
    OverlappingGuards {
        state: usize,
        label: String,
        a: String,
        b: String,
    },
    #[error("state {state} guard `{guard}`: probabilities sum to {sum}, expected 1")]
    BadProbabilitySum {
        state: usize,
        guard: String,
        sum: f64,
    },
    #[error("terminal state {0} has outgoing transitions")]
    TerminalWithTransitions(usize),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("{0}")]
    Invalid(String),
}

/// One possible response to a label: successor state, probability, reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A probabilistic reward machine with a dense transition table.
#[derive(Debug, Clone)]
pub struct Prm {
    alphabet: Alphabet,
    initial: usize,
    terminal: Vec<bool>,
    /// `table[state][label_bits]` — empty rows for terminal states.
    table: Vec<Vec<Vec<Outcome>>>,
}

impl Prm {
    pub fn new(
        alphabet: Alphabet,
        initial: usize,
        terminal: Vec<bool>,
        table: Vec<Vec<Vec<Outcome>>>,
    ) -> Result<Prm, MachineError> {
        let n = terminal.len();
        if table.len() != n {
            return Err(MachineError::Invalid(format!(
                "{} transition rows for {} states",
                table.len(),
                n
            )));
        }
        if initial >= n {
            return Err(MachineError::StateOutOfRange(initial));
        }
        for (u, row) in table.iter().enumerate() {
            if terminal[u] {
                if row.iter().any(|o| !o.is_empty()) {
                    return Err(MachineError::TerminalWithTransitions(u));
                }
                continue;
            }
            if row.len() != alphabet.n_labels() {
                return Err(MachineError::Invalid(format!(
                    "state {u}: row covers {} labels, alphabet has {}",
                    row.len(),
                    alphabet.n_labels()
                )));
            }
            for (bits, outs) in row.iter().enumerate() {
                if outs.is_empty() {
                    return Err(MachineError::MissingGuard {
                        state: u,
                        label: alphabet.format_label(bits as u32),
                    });
                }
                let sum: f64 = outs.iter().map(|o| o.prob).sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(MachineError::BadProbabilitySum {
                        state: u,
                        guard: alphabet.format_label(bits as u32),
                        sum,
                    });
                }
                for o in outs {
                    if o.next >= n {
                        return Err(MachineError::StateOutOfRange(o.next));
                    }
                    if !(o.prob > 0.0) {
                        return Err(MachineError::Invalid(format!(
                            "state {u}: non-positive outcome probability {}",
                            o.prob
                        )));
                    }
                }
            }
        }
        Ok(Prm {
            alphabet,
            initial,
            terminal,
            table,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.terminal.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_terminal(&self, u: usize) -> bool {
        self.terminal[u]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(|&u| self.terminal[u])
    }

    /// Outcome distribution for a non-terminal state reading a label.
    pub fn outcomes(&self, u: usize, label_bits: u32) -> &[Outcome] {
        &self.table[u][label_bits as usize]
    }

    /// Samples a transition; terminal states are absorbing with reward 0.
    pub fn step<R: Rng + ?Sized>(&self, u: usize, label_bits: u32, rng: &mut R) -> (usize, f64) {
        if self.terminal[u] {
            return (u, 0.0);
        }
        let outs = self.outcomes(u, label_bits);
        if outs.len() == 1 {
            return (outs[0].next, outs[0].reward);
        }
        let mut x: f64 = rng.gen();
        for o in outs {
            x -= o.prob;
            if x < 0.0 {
                return (o.next, o.reward);
            }
        }
        let last = outs.last().unwrap();
        (last.next, last.reward)
    }

    /// The same machine with every reward negated.
    pub fn negate(&self) -> Prm {
        let table = self
            .table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|outs| {
                        outs.iter()
                            .map(|o| Outcome {
                                reward: -o.reward,
                                ..*o
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Prm {
            alphabet: self.alphabet.clone(),
            initial: self.initial,
            terminal: self.terminal.clone(),
            table,
        }
    }

    /// Largest absolute reward appearing on any transition (0 if none).
    pub fn max_abs_reward(&self) -> f64 {
        self.table
            .iter()
            .flatten()
            .flatten()
            .map(|o| o.reward.abs())
            .fold(0.0, f64::max)
    }

    /// Label-optimistic optimal values: the fixed point of
    /// `v(u) = max over labels of sum τ(u,l,u') (σ(u,l,u') + γ v(u'))`,
    /// with terminal states pinned at exactly 0. Iteration is synchronous
    /// and stops when the sup-norm residual drops below `tol`.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> ValueTable {
        let n = self.n_states();
        let mut v = vec![0.0f64; n];
        let mut v2 = vec![0.0f64; n];
        loop {
            let mut residual = 0.0f64;
            for u in 0..n {
                if self.terminal[u] {
                    v2[u] = 0.0;
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                for outs in &self.table[u] {
                    let mut q = 0.0;
                    for o in outs {
                        q += o.prob * (o.reward + gamma * v[o.next]);
                    }
                    if q > best {
                        best = q;
                    }
                }
                v2[u] = best;
                residual = residual.max((v2[u] - v[u]).abs());
            }
            std::mem::swap(&mut v, &mut v2);
            if residual < tol {
                break;
            }
        }
        ValueTable { values: v, gamma }
    }

    /// A reward strictly below anything an optimal policy could collect:
    /// `-1 - max |reward| - max over states of the optimal value`.
    pub fn minimal_reward(&self, gamma: f64) -> f64 {
        let v = self.value_iteration(gamma, 1e-12);
        -1.0 - self.max_abs_reward() - v.max_value()
    }

    /// Copy with the rewards of every transition entering one of `targets`
    /// replaced by `reward`. Used to probe that rewards on unreachable
    /// states cannot matter.
    pub fn with_rewards_into(&self, targets: &[usize], reward: f64) -> Prm {
        let mut p = self.clone();
        for row in &mut p.table {
            for outs in row {
                for o in outs.iter_mut() {
                    if targets.contains(&o.next) {
                        o.reward = reward;
                    }
                }
            }
        }
        p
    }

    /// Copy with the given states additionally marked terminal (their
    /// outgoing transitions are dropped).
    pub fn with_extra_terminals(&self, extra: &[usize]) -> Prm {
        let mut p = self.clone();
        for &u in extra {
            p.terminal[u] = true;
            p.table[u] = Vec::new();
        }
        p
    }

    /// Parses the machine file format:
    ///
    /// ```text
    /// ap: c s o f
    /// states: 5
    /// initial: 0
    /// terminals: 4
    /// 0 c & !s -> 1 0.9 0
    /// 0 s -> 3 1 0
    /// ...
    /// ```
    ///
    /// Each transition line is `from guard -> to prob reward`. For every
    /// non-terminal state the guards must pick exactly one distribution for
    /// every concrete label, and each distribution must sum to 1.
    pub fn from_text(text: &str) -> Result<Prm, MachineError> {
        let mut alphabet: Option<Alphabet> = None;
        let mut n_states: Option<usize> = None;
        let mut initial: Option<usize> = None;
        let mut terminals: Vec<usize> = Vec::new();
        // Per state: guard text -> (guard formula, outcomes), insertion ordered.
        let mut guarded: HashMap<usize, Vec<(String, Formula, Vec<Outcome>)>> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| MachineError::Parse {
                line: lineno + 1,
                msg,
            };
            if let Some(rest) = line.strip_prefix("ap:") {
                alphabet = Some(
                    Alphabet::new(rest.split_whitespace())
                        .map_err(|e| err(e.to_string()))?,
                );
            } else if let Some(rest) = line.strip_prefix("states:") {
                n_states =
                    Some(rest.trim().parse().map_err(|_| err("bad state count".into()))?);
            } else if let Some(rest) = line.strip_prefix("initial:") {
                initial =
                    Some(rest.trim().parse().map_err(|_| err("bad initial state".into()))?);
            } else if let Some(rest) = line.strip_prefix("terminals:") {
                for t in rest.split_whitespace() {
                    terminals.push(t.parse().map_err(|_| err("bad terminal state".into()))?);
                }
            } else {
                let alf = alphabet
                    .as_ref()
                    .ok_or_else(|| err("transition before `ap:` header".into()))?;
                let (lhs, rhs) = line
                    .split_once("->")
                    .ok_or_else(|| err("expected `from guard -> to prob reward`".into()))?;
                let lhs = lhs.trim();
                let (from_txt, guard_txt) = lhs
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err("expected `from guard` before `->`".into()))?;
                let from: usize = from_txt
                    .parse()
                    .map_err(|_| err("bad source state".into()))?;
                let guard_txt = guard_txt.trim();
                let guard = parse_formula(guard_txt, alf).map_err(|e| err(e.to_string()))?;
                if !guard.is_propositional() {
                    return Err(err(format!("guard `{guard_txt}` is not propositional")));
                }
                let fields: Vec<&str> = rhs.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(err("expected `to prob reward` after `->`".into()));
                }
                let to: usize = fields[0].parse().map_err(|_| err("bad target state".into()))?;
                let prob: f64 = fields[1].parse().map_err(|_| err("bad probability".into()))?;
                let reward: f64 = fields[2].parse().map_err(|_| err("bad reward".into()))?;
                let entry = guarded.entry(from).or_default();
                match entry.iter_mut().find(|(g, _, _)| g == guard_txt) {
                    Some((_, _, outs)) => outs.push(Outcome {
                        next: to,
                        prob,
                        reward,
                    }),
                    None => entry.push((
                        guard_txt.to_string(),
                        guard,
                        vec![Outcome {
                            next: to,
                            prob,
                            reward,
                        }],
                    )),
                }
            }
        }
        let alphabet = alphabet.ok_or(MachineError::Parse {
            line: 0,
            msg: "missing `ap:` header".into(),
        })?;
        let n = n_states.ok_or(MachineError::Parse {
            line: 0,
            msg: "missing `states:` header".into(),
        })?;
        let initial = initial.ok_or(MachineError::Parse {
            line: 0,
            msg: "missing `initial:` header".into(),
        })?;
        let mut terminal = vec![false; n];
        for t in terminals {
            if t >= n {
                return Err(MachineError::StateOutOfRange(t));
            }
            terminal[t] = true;
        }
        // Lower guarded transitions to the dense per-label table, checking
        // that exactly one guard fires for each label.
        let mut table: Vec<Vec<Vec<Outcome>>> = vec![Vec::new(); n];
        for (u, guards) in &guarded {
            if *u >= n {
                return Err(MachineError::StateOutOfRange(*u));
            }
            if terminal[*u] {
                return Err(MachineError::TerminalWithTransitions(*u));
            }
            let mut row: Vec<Vec<Outcome>> = Vec::with_capacity(alphabet.n_labels());
            for bits in 0..alphabet.n_labels() as u32 {
                let mut matched: Option<&(String, Formula, Vec<Outcome>)> = None;
                for g in guards {
                    if g.1.eval_propositional(bits, &alphabet) {
                        if let Some(prev) = matched {
                            return Err(MachineError::OverlappingGuards {
                                state: *u,
                                label: alphabet.format_label(bits),
                                a: prev.0.clone(),
                                b: g.0.clone(),
                            });
                        }
                        matched = Some(g);
                    }
                }
                let g = matched.ok_or_else(|| MachineError::MissingGuard {
                    state: *u,
                    label: alphabet.format_label(bits),
                })?;
                row.push(g.2.clone());
            }
            table[*u] = row;
        }
        Prm::new(alphabet, initial, terminal, table)
    }

    /// Serializes the machine. Transitions are grouped per state by
    /// identical outcome distributions; guards come out as disjunctions of
    /// full conjunctions, so the output is more verbose than hand-written
    /// input but parses back to the same machine.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ap: {}", self.alphabet);
        let _ = writeln!(out, "states: {}", self.n_states());
        let _ = writeln!(out, "initial: {}", self.initial);
        let terms: Vec<String> = self.terminal_states().map(|u| u.to_string()).collect();
        if !terms.is_empty() {
            let _ = writeln!(out, "terminals: {}", terms.join(" "));
        }
        for u in 0..self.n_states() {
            if self.terminal[u] {
                continue;
            }
            let mut groups: Vec<(&Vec<Outcome>, Vec<u32>)> = Vec::new();
            for bits in 0..self.alphabet.n_labels() as u32 {
                let outs = &self.table[u][bits as usize];
                match groups.iter_mut().find(|(o, _)| *o == outs) {
                    Some((_, v)) => v.push(bits),
                    None => groups.push((outs, vec![bits])),
                }
            }
            for (outs, labels) in groups {
                let guard = if labels.len() == self.alphabet.n_labels() {
                    "true".to_string()
                } else {
                    labels
                        .iter()
                        .map(|&b| format!("({})", self.alphabet.minterm(b)))
                        .collect::<Vec<_>>()
                        .join(" | ")
                };
                for o in outs {
                    let _ = writeln!(out, "{} {} -> {} {} {}", u, guard, o.next, o.prob, o.reward);
                }
            }
        }
        out
    }
}

/// Result of value iteration: one value per machine state.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub gamma: f64,
}

impl ValueTable {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A machine paired with the automaton it was multiplied with.
#[derive(Debug, Clone)]
pub struct ProductPrm {
    pub prm: Prm,
    /// For each product state, the (machine state, automaton state) pair.
    pub provenance: Vec<(usize, usize)>,
    /// Product states whose automaton component is a rejecting sink.
    pub sink_component: Vec<bool>,
    /// The punishment reward used on sink-entering transitions.
    pub minimal_reward: f64,
    n_dfa_states: usize,
}

impl ProductPrm {
    pub fn pair_id(&self, u: usize, q: usize) -> usize {
        u * self.n_dfa_states + q
    }
}

/// Synchronous product of a reward machine and a causal automaton over the
/// union alphabet. The full state grid is kept; rewards mirror the machine
/// except that transitions whose automaton successor is a rejecting sink
/// pay `minimal_reward` instead. Product states whose machine component is
/// terminal are terminal.
pub fn compute_product(a: &Prm, dfa: &CausalDfa, minimal_reward: f64) -> ProductPrm {
    let alphabet = a.alphabet().union(dfa.alphabet());
    let pa = alphabet.projection_table(a.alphabet());
    let pd = alphabet.projection_table(dfa.alphabet());
    let n_q = dfa.n_states();
    let n_states = a.n_states() * n_q;
    let pair = |u: usize, q: usize| u * n_q + q;
    let mut terminal = vec![false; n_states];
    let mut table: Vec<Vec<Vec<Outcome>>> = vec![Vec::new(); n_states];
    let mut provenance = vec![(0usize, 0usize); n_states];
    let mut sink_component = vec![false; n_states];
    for u in 0..a.n_states() {
        for q in 0..n_q {
            let x = pair(u, q);
            provenance[x] = (u, q);
            sink_component[x] = dfa.is_rejecting_sink(q);
            if a.is_terminal(u) {
                terminal[x] = true;
                continue;
            }
            let row = (0..alphabet.n_labels() as u32)
                .map(|bits| {
                    let q2 = dfa.next(q, pd[bits as usize]);
                    let punished = dfa.is_rejecting_sink(q2);
                    a.outcomes(u, pa[bits as usize])
                        .iter()
                        .map(|o| Outcome {
                            next: pair(o.next, q2),
                            prob: o.prob,
                            reward: if punished { minimal_reward } else { o.reward },
                        })
                        .collect()
                })
                .collect();
            table[x] = row;
        }
    }
    let prm = Prm::new(
        alphabet,
        pair(a.initial(), dfa.initial()),
        terminal,
        table,
    )
    .expect("product of a valid machine and a total automaton is valid");
    ProductPrm {
        prm,
        provenance,
        sink_component,
        minimal_reward,
        n_dfa_states: n_q,
    }
}

/// Output of the causal construction: the product machine with extra
/// terminal states wherever both value bounds vanish.
#[derive(Debug, Clone)]
pub struct CausalBuild {
    pub product: ProductPrm,
    /// Optimal values of the product machine (upper-bound side).
    pub v_upper: ValueTable,
    /// Optimal values of the product of the negated machine (the negation
    /// of the lower-bound side).
    pub v_lower: ValueTable,
    /// Product states newly marked terminal, in increasing order.
    pub added_terminals: Vec<usize>,
}

pub const TERMINAL_TOL: f64 = 1e-8;

/// Builds the causal machine: multiplies `a` and its negation with the
/// automaton, value-iterates both products, and marks as terminal every
/// product state whose value is 0 in both (no reward can be gained or lost
/// from it, so exploration there is pointless).
pub fn build_causal_prm(a: &Prm, dfa: &CausalDfa, gamma: f64) -> CausalBuild {
    let m = a.minimal_reward(gamma);
    let b1 = compute_product(a, dfa, m);
    let b2 = compute_product(&a.negate(), dfa, m);
    let v1 = b1.prm.value_iteration(gamma, 1e-12);
    let v2 = b2.prm.value_iteration(gamma, 1e-12);
    let added: Vec<usize> = (0..b1.prm.n_states())
        .filter(|&x| {
            !b1.prm.is_terminal(x)
                && v1.values[x].abs() < TERMINAL_TOL
                && v2.values[x].abs() < TERMINAL_TOL
        })
        .collect();
    let prm = b1.prm.with_extra_terminals(&added);
    CausalBuild {
        product: ProductPrm { prm, ..b1 },
        v_upper: v1,
        v_lower: v2,
        added_terminals: added,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // q0 --x--> q1 --x--> q2 (terminal), reward 1 on the last hop, self
    // loops on !x. Optimal values under gamma: v(q1)=1, v(q0)=gamma.
    const CHAIN: &str = "
ap: x
states: 3
initial: 0
terminals: 2
0 !x -> 0 1 0
0 x -> 1 1 0
1 !x -> 1 1 0
1 x -> 2 1 1
";

    #[test]
    fn value_iteration_on_a_chain() {
        let m = Prm::from_text(CHAIN).unwrap();
        let v = m.value_iteration(0.9, 1e-12);
        assert!((v.values[2] - 0.0).abs() < 1e-9);
        assert!((v.values[1] - 1.0).abs() < 1e-9);
        assert!((v.values[0] - 0.9).abs() < 1e-9);
        // -1 - max |reward| - max value
        assert!((m.minimal_reward(0.9) + 3.0).abs() < 1e-9);
    }

    #[test]
    fn stepping_and_negation() {
        let m = Prm::from_text(CHAIN).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = m.alphabet().bits(&label(["x"])).unwrap();
        let (u, r) = m.step(0, x, &mut rng);
        assert_eq!((u, r), (1, 0.0));
        let (u, r) = m.step(1, x, &mut rng);
        assert_eq!((u, r), (2, 1.0));
        // Terminal states absorb without reward.
        assert_eq!(m.step(2, x, &mut rng), (2, 0.0));
        let n = m.negate();
        assert_eq!(n.outcomes(1, x)[0].reward, -1.0);
        assert_eq!(n.negate().to_text(), m.to_text());
    }

    #[test]
    fn probabilistic_outcomes_resolve_by_probability() {
        let text = "
ap: x
states: 3
initial: 0
terminals: 1 2
0 !x -> 0 1 0
0 x -> 1 0.25 1
0 x -> 2 0.75 0
";
        let m = Prm::from_text(text).unwrap();
        let x = m.alphabet().bits(&label(["x"])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..10_000 {
            if m.step(0, x, &mut rng).0 == 1 {
                hits += 1;
            }
        }
        assert!((hits as f64 / 10_000.0 - 0.25).abs() < 0.02, "got {hits}");
    }

    #[test]
    fn from_text_rejects_bad_machines() {
        // Guards must cover every label exactly once.
        assert!(matches!(
            Prm::from_text("ap: x\nstates: 2\ninitial: 0\nterminals: 1\n0 x -> 1 1 0\n"),
            Err(MachineError::MissingGuard { .. })
        ));
        assert!(matches!(
            Prm::from_text(
                "ap: x\nstates: 2\ninitial: 0\nterminals: 1\n0 x -> 1 1 0\n0 true -> 0 1 0\n"
            ),
            Err(MachineError::OverlappingGuards { .. })
        ));
        // Probabilities must sum to one per (state, guard).
        assert!(Prm::from_text(
            "ap: x\nstates: 2\ninitial: 0\nterminals: 1\n0 !x -> 0 1 0\n0 x -> 1 0.5 0\n"
        )
        .is_err());
        // Terminal states must not carry transitions.
        assert!(Prm::from_text(
            "ap: x\nstates: 2\ninitial: 0\nterminals: 1\n0 true -> 0 1 0\n1 true -> 1 1 0\n"
        )
        .is_err());
    }

    #[test]
    fn text_round_trip_preserves_outcomes() {
        let m = Prm::from_text(CHAIN).unwrap();
        let back = Prm::from_text(&m.to_text()).unwrap();
        assert_eq!(back.n_states(), m.n_states());
        for u in 0..m.n_states() {
            assert_eq!(back.is_terminal(u), m.is_terminal(u));
            if m.is_terminal(u) {
                continue;
            }
            for bits in 0..m.alphabet().n_labels() as u32 {
                assert_eq!(back.outcomes(u, bits), m.outcomes(u, bits));
            }
        }
    }

    #[test]
    fn reward_and_terminal_rewrites() {
        let m = Prm::from_text(CHAIN).unwrap();
        let x = m.alphabet().bits(&label(["x"])).unwrap();
        let bumped = m.with_rewards_into(&[1], 5.0);
        assert_eq!(bumped.outcomes(0, x)[0].reward, 5.0);
        assert_eq!(bumped.outcomes(1, x)[0].reward, 1.0);
        let cut = m.with_extra_terminals(&[1]);
        assert!(cut.is_terminal(1));
        let v = cut.value_iteration(0.9, 1e-12);
        assert!(v.values[0].abs() < 1e-9, "q0 can no longer collect the reward");
    }
}
