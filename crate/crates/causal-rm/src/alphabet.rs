//! Finite label alphabets over a small set of atomic propositions.
//!
//! A label is the set of propositions observed in one step. Everything
//! downstream (automata, reward machines, the product construction) works
//! over the dense encoding of labels as bitmasks, so the proposition count
//! is capped at 16 which is far beyond anything the case studies need.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A label: the set of proposition names seen in a single step.
pub type Label = BTreeSet<String>;

/// Builds a label from string-ish items, mostly for tests and examples.
pub fn label<I, S>(props: I) -> Label
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    props.into_iter().map(Into::into).collect()
}

pub const MAX_PROPS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("alphabet has {0} propositions, maximum is {MAX_PROPS}")]
    TooManyProps(usize),
}

/// An ordered set of proposition names defining a 2^n label alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    props: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(props: I) -> Result<Self, AlphabetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut props: Vec<String> = props.into_iter().map(Into::into).collect();
        props.sort();
        props.dedup();
        if props.len() > MAX_PROPS {
            return Err(AlphabetError::TooManyProps(props.len()));
        }
        Ok(Alphabet { props })
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    /// Number of distinct labels, i.e. 2^len.
    pub fn n_labels(&self) -> usize {
        1usize << self.props.len()
    }

    pub fn position(&self, prop: &str) -> Option<usize> {
        self.props.binary_search_by(|p| p.as_str().cmp(prop)).ok()
    }

    pub fn contains(&self, prop: &str) -> bool {
        self.position(prop).is_some()
    }

    /// Encodes a label, rejecting propositions outside the alphabet.
    pub fn bits(&self, label: &Label) -> Result<u32, AlphabetError> {
        let mut bits = 0u32;
        for p in label {
            let i = self
                .position(p)
                .ok_or_else(|| AlphabetError::UnknownProp(p.clone()))?;
            bits |= 1 << i;
        }
        Ok(bits)
    }

    /// Encodes a label, silently dropping propositions outside the alphabet.
    pub fn project(&self, label: &Label) -> u32 {
        let mut bits = 0u32;
        for p in label {
            if let Some(i) = self.position(p) {
                bits |= 1 << i;
            }
        }
        bits
    }

    /// Decodes a bitmask back into a label.
    pub fn label(&self, bits: u32) -> Label {
        self.props
            .iter()
            .enumerate()
            .filter(|(i, _)| bits & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect()
    }

    pub fn union(&self, other: &Alphabet) -> Alphabet {
        Alphabet::new(self.props.iter().chain(other.props.iter()).cloned())
            .expect("union of valid alphabets stays within the size cap")
    }

    /// For each label of `self`, the bitmask of the same label restricted to
    /// `sub`. Propositions of `sub` missing from `self` read as absent.
    pub fn projection_table(&self, sub: &Alphabet) -> Vec<u32> {
        let mut single = vec![0u32; self.props.len()];
        for (i, p) in self.props.iter().enumerate() {
            if let Some(j) = sub.position(p) {
                single[i] = 1 << j;
            }
        }
        (0..self.n_labels() as u32)
            .map(|bits| {
                let mut out = 0;
                for (i, &mask) in single.iter().enumerate() {
                    if bits & (1 << i) != 0 {
                        out |= mask;
                    }
                }
                out
            })
            .collect()
    }

    /// Renders a label bitmask as `{a, b}`.
    pub fn format_label(&self, bits: u32) -> String {
        let names: Vec<&str> = self
            .props
            .iter()
            .enumerate()
            .filter(|(i, _)| bits & (1 << *i) != 0)
            .map(|(_, p)| p.as_str())
            .collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Renders a label bitmask as the full conjunction `a & !b & c`.
    pub fn minterm(&self, bits: u32) -> String {
        if self.props.is_empty() {
            return "true".to_string();
        }
        let lits: Vec<String> = self
            .props
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if bits & (1 << i) != 0 {
                    p.clone()
                } else {
                    format!("!{p}")
                }
            })
            .collect();
        lits.join(" & ")
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.props.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_roundtrip() {
        let alf = Alphabet::new(["s", "o", "f"]).unwrap();
        assert_eq!(alf.props(), ["f", "o", "s"]);
        let l = label(["s", "f"]);
        let bits = alf.bits(&l).unwrap();
        assert_eq!(alf.label(bits), l);
    }

    #[test]
    fn unknown_prop_rejected() {
        let alf = Alphabet::new(["a"]).unwrap();
        assert_eq!(
            alf.bits(&label(["z"])),
            Err(AlphabetError::UnknownProp("z".into()))
        );
        assert_eq!(alf.project(&label(["z", "a"])), 1);
    }

    #[test]
    fn projection_table_drops_foreign_props() {
        let joint = Alphabet::new(["a", "b", "c"]).unwrap();
        let sub = Alphabet::new(["b"]).unwrap();
        let table = joint.projection_table(&sub);
        for bits in 0..joint.n_labels() as u32 {
            let expected = sub.project(&joint.label(bits));
            assert_eq!(table[bits as usize], expected);
        }
    }
}
