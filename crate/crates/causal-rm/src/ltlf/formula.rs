//! Finite-trace temporal formulas.
//!
//! `Formula` is the surface syntax tree. The compiler and progression work
//! on negation normal form (NNF), where `Not` only wraps atoms and a dual
//! weak-next operator appears that has no surface syntax.

use std::collections::BTreeSet;
use std::fmt;

/// A temporal formula over atomic propositions.
///
/// `WeakNext` is internal: negation normal form needs a dual for `Next`
/// (`!X f` becomes `WX !f`). The parser never produces it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    WeakNext(Box<Formula>),
    Globally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    WeakUntil(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    /// Canonical conjunction: flattens, folds constants, sorts and dedups.
    pub fn and(children: Vec<Formula>) -> Formula {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        match flat.len() {
            0 => Formula::True,
            1 => flat.pop().unwrap(),
            _ => Formula::And(flat),
        }
    }

    /// Canonical disjunction, dual to [`Formula::and`].
    pub fn or(children: Vec<Formula>) -> Formula {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        match flat.len() {
            0 => Formula::False,
            1 => flat.pop().unwrap(),
            _ => Formula::Or(flat),
        }
    }

    /// The atomic propositions mentioned anywhere in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f)
            | Formula::Next(f)
            | Formula::WeakNext(f)
            | Formula::Globally(f) => f.collect_atoms(out),
            Formula::And(v) | Formula::Or(v) => {
                for f in v {
                    f.collect_atoms(out);
                }
            }
            Formula::Implies(a, b)
            | Formula::Until(a, b)
            | Formula::WeakUntil(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Negation normal form: `Implies` is desugared and `Not` is pushed
    /// down to atoms, introducing `WeakNext` as the dual of `Next` and
    /// `Until` as the dual of `Globally`/`WeakUntil`.
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, neg: bool) -> Formula {
        match self {
            Formula::True => {
                if neg {
                    Formula::False
                } else {
                    Formula::True
                }
            }
            Formula::False => {
                if neg {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Formula::Atom(a) => {
                if neg {
                    Formula::Not(Box::new(Formula::Atom(a.clone())))
                } else {
                    Formula::Atom(a.clone())
                }
            }
            Formula::Not(f) => f.nnf(!neg),
            Formula::And(v) => {
                let children = v.iter().map(|f| f.nnf(neg)).collect();
                if neg {
                    Formula::or(children)
                } else {
                    Formula::and(children)
                }
            }
            Formula::Or(v) => {
                let children = v.iter().map(|f| f.nnf(neg)).collect();
                if neg {
                    Formula::and(children)
                } else {
                    Formula::or(children)
                }
            }
            Formula::Implies(a, b) => {
                if neg {
                    // !(a -> b) = a & !b
                    Formula::and(vec![a.nnf(false), b.nnf(true)])
                } else {
                    Formula::or(vec![a.nnf(true), b.nnf(false)])
                }
            }
            Formula::Next(f) => {
                if neg {
                    Formula::WeakNext(Box::new(f.nnf(true)))
                } else {
                    Formula::Next(Box::new(f.nnf(false)))
                }
            }
            Formula::WeakNext(f) => {
                if neg {
                    Formula::Next(Box::new(f.nnf(true)))
                } else {
                    Formula::WeakNext(Box::new(f.nnf(false)))
                }
            }
            Formula::Globally(f) => {
                if neg {
                    // !G f = true U !f
                    Formula::Until(Box::new(Formula::True), Box::new(f.nnf(true)))
                } else {
                    Formula::Globally(Box::new(f.nnf(false)))
                }
            }
            Formula::Until(a, b) => {
                if neg {
                    // !(a U b) = !b W (!a & !b)
                    Formula::WeakUntil(
                        Box::new(b.nnf(true)),
                        Box::new(Formula::and(vec![a.nnf(true), b.nnf(true)])),
                    )
                } else {
                    Formula::Until(Box::new(a.nnf(false)), Box::new(b.nnf(false)))
                }
            }
            Formula::WeakUntil(a, b) => {
                if neg {
                    // !(a W b) = !b U (!a & !b)
                    Formula::Until(
                        Box::new(b.nnf(true)),
                        Box::new(Formula::and(vec![a.nnf(true), b.nnf(true)])),
                    )
                } else {
                    Formula::WeakUntil(Box::new(a.nnf(false)), Box::new(b.nnf(false)))
                }
            }
        }
    }

    /// True if `Not` only wraps atoms and no `Implies` remains.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => matches!(**f, Formula::Atom(_)),
            Formula::Implies(_, _) => false,
            Formula::And(v) | Formula::Or(v) => v.iter().all(Formula::is_nnf),
            Formula::Next(f) | Formula::WeakNext(f) | Formula::Globally(f) => f.is_nnf(),
            Formula::Until(a, b) | Formula::WeakUntil(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }

    /// True if the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_propositional(),
            Formula::And(v) | Formula::Or(v) => v.iter().all(Formula::is_propositional),
            Formula::Implies(a, b) => a.is_propositional() && b.is_propositional(),
            Formula::Next(_)
            | Formula::WeakNext(_)
            | Formula::Globally(_)
            | Formula::Until(_, _)
            | Formula::WeakUntil(_, _) => false,
        }
    }

    /// Evaluates a propositional formula against a single label bitmask.
    /// Panics if the formula has temporal operators or atoms outside `alf`.
    pub fn eval_propositional(&self, bits: u32, alf: &crate::alphabet::Alphabet) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => {
                let i = alf.position(a).expect("atom declared in alphabet");
                bits & (1 << i) != 0
            }
            Formula::Not(f) => !f.eval_propositional(bits, alf),
            Formula::And(v) => v.iter().all(|f| f.eval_propositional(bits, alf)),
            Formula::Or(v) => v.iter().any(|f| f.eval_propositional(bits, alf)),
            Formula::Implies(a, b) => {
                !a.eval_propositional(bits, alf) || b.eval_propositional(bits, alf)
            }
            _ => panic!("eval_propositional called on a temporal formula"),
        }
    }
}

// Printing follows the surface grammar precedence:
//   ->  <  |  <  &  <  U/W  <  !/X/G  <  atoms
// `->` and U/W associate to the right, so their left operand at the same
// level gets parenthesized. `WeakNext f` has no surface form and prints as
// the equivalent `!X !f`.
const LVL_IMPLIES: u8 = 1;
const LVL_OR: u8 = 2;
const LVL_AND: u8 = 3;
const LVL_UNTIL: u8 = 4;
const LVL_UNARY: u8 = 5;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) => 6,
        Formula::Not(_) | Formula::Next(_) | Formula::WeakNext(_) | Formula::Globally(_) => {
            LVL_UNARY
        }
        Formula::Until(_, _) | Formula::WeakUntil(_, _) => LVL_UNTIL,
        Formula::And(_) => LVL_AND,
        Formula::Or(_) => LVL_OR,
        Formula::Implies(_, _) => LVL_IMPLIES,
    }
}

fn write_at(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let lvl = level(f);
    let parens = lvl < min;
    if parens {
        write!(out, "(")?;
    }
    match f {
        Formula::True => write!(out, "true")?,
        Formula::False => write!(out, "false")?,
        Formula::Atom(a) => write!(out, "{a}")?,
        Formula::Not(g) => {
            write!(out, "!")?;
            write_at(g, LVL_UNARY, out)?;
        }
        Formula::Next(g) => {
            write!(out, "X ")?;
            write_at(g, LVL_UNARY, out)?;
        }
        Formula::WeakNext(g) => {
            write!(out, "!X !")?;
            write_at(g, LVL_UNARY, out)?;
        }
        Formula::Globally(g) => {
            write!(out, "G ")?;
            write_at(g, LVL_UNARY, out)?;
        }
        Formula::Until(a, b) => {
            write_at(a, LVL_UNTIL + 1, out)?;
            write!(out, " U ")?;
            write_at(b, LVL_UNTIL, out)?;
        }
        Formula::WeakUntil(a, b) => {
            write_at(a, LVL_UNTIL + 1, out)?;
            write!(out, " W ")?;
            write_at(b, LVL_UNTIL, out)?;
        }
        Formula::And(v) => {
            for (i, c) in v.iter().enumerate() {
                if i > 0 {
                    write!(out, " & ")?;
                }
                write_at(c, LVL_AND + 1, out)?;
            }
        }
        Formula::Or(v) => {
            for (i, c) in v.iter().enumerate() {
                if i > 0 {
                    write!(out, " | ")?;
                }
                write_at(c, LVL_OR + 1, out)?;
            }
        }
        Formula::Implies(a, b) => {
            write_at(a, LVL_IMPLIES + 1, out)?;
            write!(out, " -> ")?;
            write_at(b, LVL_IMPLIES, out)?;
        }
    }
    if parens {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(self, 0, out)
    }
}
