//! Text grammar for formulas and temporal-logic cause/effect diagrams.
//!
//! Formula grammar (loosest to tightest, `->` right-associative):
//!
//! ```text
//! implies := or ('->' implies)?
//! or      := and ('|' and)*
//! and     := until ('&' until)*
//! until   := unary (('U' | 'W') until)?
//! unary   := ('!' | 'X' | 'G') unary | '(' implies ')' | atom | true | false
//! atom    := [a-z][a-z0-9_]*
//! ```
//!
//! Diagram files declare their alphabet and one cause/effect pair per line:
//!
//! ```text
//! ap: s o f
//! # cause ~> effect
//! s ~> !o W f
//! f ~> G !o
//! ```

use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::ltlf::Formula;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown atom `{atom}` at byte {pos}; declared: {declared}")]
    UnknownAtom {
        atom: String,
        pos: usize,
        declared: String,
    },
    #[error("line {line}: {msg}")]
    Diagram { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    True,
    False,
    Not,
    Next,
    Globally,
    Until,
    WeakUntil,
    And,
    Or,
    Implies,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '!' => {
                toks.push((Tok::Not, i));
                i += 1;
            }
            '&' => {
                toks.push((Tok::And, i));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Or, i));
                i += 1;
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Implies, i));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax {
                        pos: i,
                        msg: "expected `->`".into(),
                    });
                }
            }
            'X' => {
                toks.push((Tok::Next, i));
                i += 1;
            }
            'G' => {
                toks.push((Tok::Globally, i));
                i += 1;
            }
            'U' => {
                toks.push((Tok::Until, i));
                i += 1;
            }
            'W' => {
                toks.push((Tok::WeakUntil, i));
                i += 1;
            }
            'a'..='z' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                toks.push((
                    match word {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        _ => Tok::Atom(word.to_string()),
                    },
                    start,
                ));
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
    alphabet: &'a Alphabet,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.peek() == Some(&Tok::Implies) {
            self.bump();
            let rhs = self.implies()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::or(parts)
        })
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.until()?];
        while self.peek() == Some(&Tok::And) {
            self.bump();
            parts.push(self.until()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::and(parts)
        })
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        match self.peek() {
            Some(Tok::Until) => {
                self.bump();
                let rhs = self.until()?;
                Ok(Formula::Until(Box::new(lhs), Box::new(rhs)))
            }
            Some(Tok::WeakUntil) => {
                self.bump();
                let rhs = self.until()?;
                Ok(Formula::WeakUntil(Box::new(lhs), Box::new(rhs)))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Not) => Ok(Formula::Not(Box::new(self.unary()?))),
            Some(Tok::Next) => Ok(Formula::Next(Box::new(self.unary()?))),
            Some(Tok::Globally) => Ok(Formula::Globally(Box::new(self.unary()?))),
            Some(Tok::LParen) => {
                let f = self.implies()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(f),
                    _ => Err(ParseError::Syntax {
                        pos: self.here(),
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Some(Tok::True) => Ok(Formula::True),
            Some(Tok::False) => Ok(Formula::False),
            Some(Tok::Atom(a)) => {
                if self.alphabet.contains(&a) {
                    Ok(Formula::Atom(a))
                } else {
                    Err(ParseError::UnknownAtom {
                        atom: a,
                        pos,
                        declared: self.alphabet.to_string(),
                    })
                }
            }
            _ => Err(ParseError::Syntax {
                pos,
                msg: "expected a formula".into(),
            }),
        }
    }
}

/// Parses a formula; atoms must belong to `alphabet`.
pub fn parse_formula(text: &str, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        alphabet,
    };
    let f = p.implies()?;
    if p.pos != toks.len() {
        return Err(ParseError::Syntax {
            pos: p.here(),
            msg: "trailing input after formula".into(),
        });
    }
    Ok(f)
}

/// A temporal-logic cause/effect diagram: a set of edges `cause ~> effect`,
/// denoting the requirement `G(cause -> effect)` for every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Tlcd {
    alphabet: Alphabet,
    edges: Vec<(Formula, Formula)>,
}

impl Tlcd {
    pub fn new(alphabet: Alphabet, edges: Vec<(Formula, Formula)>) -> Self {
        Tlcd { alphabet, edges }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn edges(&self) -> &[(Formula, Formula)] {
        &self.edges
    }

    /// The conjunction `G(cause -> effect)` over all edges; `true` when the
    /// diagram has no edges.
    pub fn to_formula(&self) -> Formula {
        Formula::and(
            self.edges
                .iter()
                .map(|(c, e)| {
                    Formula::Globally(Box::new(Formula::Implies(
                        Box::new(c.clone()),
                        Box::new(e.clone()),
                    )))
                })
                .collect(),
        )
    }

    /// Parses the diagram file format (`ap:` header, `cause ~> effect` lines,
    /// `#` comments).
    pub fn parse(text: &str) -> Result<Tlcd, ParseError> {
        let mut alphabet: Option<Alphabet> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ParseError::Diagram {
                line: lineno + 1,
                msg,
            };
            if let Some(rest) = line.strip_prefix("ap:") {
                if alphabet.is_some() {
                    return Err(err("duplicate `ap:` header".into()));
                }
                let props: Vec<&str> = rest.split_whitespace().collect();
                for p in &props {
                    if !p
                        .chars()
                        .next()
                        .map(|c| c.is_ascii_lowercase())
                        .unwrap_or(false)
                        || !p.chars().all(|c| {
                            c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
                        })
                    {
                        return Err(err(format!("invalid proposition name `{p}`")));
                    }
                }
                alphabet = Some(
                    Alphabet::new(props).map_err(|e| ParseError::Diagram {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?,
                );
                continue;
            }
            let alf = alphabet
                .as_ref()
                .ok_or_else(|| err("edge before `ap:` header".into()))?;
            let (lhs, rhs) = line
                .split_once("~>")
                .ok_or_else(|| err("expected `cause ~> effect`".into()))?;
            let cause = parse_formula(lhs, alf).map_err(|e| ParseError::Diagram {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            let effect = parse_formula(rhs, alf).map_err(|e| ParseError::Diagram {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            edges.push((cause, effect));
        }
        let alphabet = alphabet.ok_or(ParseError::Diagram {
            line: 0,
            msg: "missing `ap:` header".into(),
        })?;
        Ok(Tlcd { alphabet, edges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    fn alf() -> Alphabet {
        Alphabet::new(["a", "b", "c", "d"]).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let p = |t: &str| parse_formula(t, &alf()).unwrap();
        assert_eq!(p("a -> b | c & d"), p("a -> (b | (c & d))"));
        assert_eq!(p("a -> b -> c"), p("a -> (b -> c)"));
        assert_eq!(p("a U b U c"), p("a U (b U c)"));
        assert_eq!(p("!a & b"), p("(!a) & b"));
        assert_eq!(p("G a -> b"), p("(G a) -> b"));
        assert_eq!(p("X a U b"), p("(X a) U b"));
    }

    #[test]
    fn display_round_trips() {
        for t in [
            "G (a -> (!b W c))",
            "G (a -> G !b)",
            "a & b | !c -> X d",
            "a U (b & !c)",
            "true",
            "false W a",
        ] {
            let f = parse_formula(t, &alf()).unwrap();
            let shown = f.to_string();
            assert_eq!(parse_formula(&shown, &alf()).unwrap(), f, "through {shown}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_formula("a & zz", &alf()), Err(ParseError::UnknownAtom { .. })));
        assert!(parse_formula("a &", &alf()).is_err());
        assert!(parse_formula("(a", &alf()).is_err());
        assert!(parse_formula("a b", &alf()).is_err());
        assert!(parse_formula("", &alf()).is_err());
    }

    #[test]
    fn diagram_parsing() {
        let cd = Tlcd::parse("# comment\nap: s o f\n\ns ~> !o W f\nf ~> G !o\n").unwrap();
        assert_eq!(cd.edges().len(), 2);
        let alf = Alphabet::new(["s", "o", "f"]).unwrap();
        assert_eq!(
            cd.to_formula(),
            parse_formula("G (s -> (!o W f)) & G (f -> G !o)", &alf).unwrap()
        );
        let empty = Tlcd::parse("ap: a b\n").unwrap();
        assert_eq!(empty.to_formula(), Formula::True);
        assert!(Tlcd::parse("s ~> f\n").is_err());
        assert!(Tlcd::parse("ap: s\ns > f\n").is_err());
    }
}
