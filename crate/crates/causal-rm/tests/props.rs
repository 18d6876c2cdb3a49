//! Property tests for the logic core: the recursive semantics is restated
//! here as a naive evaluator and everything else is checked against it.

use proptest::prelude::*;

use causal_rm::alphabet::{Alphabet, Label};
use causal_rm::automata::CausalDfa;
use causal_rm::ltlf::{compile_to_dfa, evaluate, parse_formula, progress, Formula};

/// Direct recursion over the trace, satisfied to be slow. Expects its input
/// in negation normal form so that `Not` only wraps atoms.
fn naive(f: &Formula, t: &[Label]) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => !t.is_empty() && t[0].contains(a),
        Formula::Not(g) => match &**g {
            Formula::Atom(a) => !t.is_empty() && !t[0].contains(a),
            _ => panic!("naive evaluator needs NNF input"),
        },
        Formula::And(parts) => parts.iter().all(|p| naive(p, t)),
        Formula::Or(parts) => parts.iter().any(|p| naive(p, t)),
        Formula::Implies(_, _) => panic!("naive evaluator needs NNF input"),
        Formula::Next(g) => !t.is_empty() && naive(g, &t[1..]),
        Formula::WeakNext(g) => t.is_empty() || naive(g, &t[1..]),
        Formula::Globally(g) => t.is_empty() || (naive(g, t) && naive(f, &t[1..])),
        Formula::Until(a, b) => {
            !t.is_empty() && (naive(b, t) || (naive(a, t) && naive(f, &t[1..])))
        }
        Formula::WeakUntil(a, b) => {
            t.is_empty() || naive(b, t) || (naive(a, t) && naive(f, &t[1..]))
        }
    }
}

const PROPS: [&str; 2] = ["a", "b"];

fn atom() -> impl Strategy<Value = Formula> {
    prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        proptest::sample::select(&PROPS[..]).prop_map(|a| Formula::Atom(a.into())),
    ]
}

/// Random formulas over the surface syntax (everything the parser can
/// produce; no bare `WeakNext`, which only arises through NNF).
fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::and),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::or),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|f| Formula::Next(Box::new(f))),
            inner.clone().prop_map(|f| Formula::Globally(Box::new(f))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Formula::Until(Box::new(a), Box::new(b))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| Formula::WeakUntil(Box::new(a), Box::new(b))),
        ]
    })
}

fn trace() -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(
        prop::collection::btree_set(proptest::sample::select(&PROPS[..]).prop_map(String::from), 0..=2),
        0..5,
    )
}

fn all_words(alf: &Alphabet, max_len: usize) -> Vec<Vec<Label>> {
    let mut words: Vec<Vec<Label>> = vec![vec![]];
    let mut frontier = words.clone();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for bits in 0..alf.n_labels() as u32 {
                let mut w2 = w.clone();
                w2.push(alf.label(bits));
                next.push(w2);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nnf_agrees_with_the_recursive_semantics(f in formula(), t in trace()) {
        let nnf = f.to_nnf();
        prop_assert!(nnf.is_nnf());
        prop_assert_eq!(naive(&nnf, &t), evaluate(&f, &t));
    }

    #[test]
    fn progression_is_sound(f in formula(), t in trace()) {
        prop_assume!(!t.is_empty());
        let rest = progress(&f.to_nnf(), &t[0]);
        prop_assert_eq!(evaluate(&rest, &t[1..]), evaluate(&f, &t));
    }

    #[test]
    fn display_parse_round_trip(f in formula()) {
        let alf = Alphabet::new(PROPS).unwrap();
        let shown = f.to_string();
        let back = parse_formula(&shown, &alf).unwrap();
        prop_assert_eq!(&back, &f, "display was {}", shown);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compiled_dfa_matches_the_semantics(f in formula()) {
        let alf = Alphabet::new(PROPS).unwrap();
        // Progression states are formulas and can grow large before the
        // state cap trips; keep the cap low so adversarial random inputs
        // stay within memory. An explosion error yields no DFA to check.
        let Ok(dfa) = compile_to_dfa(&f, &alf, 2_000) else { return Ok(()) };
        for w in all_words(&alf, 3) {
            prop_assert_eq!(dfa.accepts(&w).unwrap(), evaluate(&f, &w), "on {:?}", w);
        }
    }
}

fn dfa() -> impl Strategy<Value = CausalDfa> {
    (1usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0..n, 4), n),
            prop::collection::vec(any::<bool>(), n),
            Just(n),
        )
            .prop_map(|(delta, accepting, _)| {
                let alf = Alphabet::new(PROPS).unwrap();
                CausalDfa::new(alf, 0, delta, accepting)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minimization_preserves_the_language(d in dfa()) {
        let m = d.minimize();
        prop_assert!(m.n_states() <= d.n_states());
        prop_assert!(d.language_equiv(&m), "witness {:?}", d.distinguishing_word(&m));
        let mm = m.minimize();
        prop_assert_eq!(mm.n_states(), m.n_states(), "minimize is not idempotent");
    }
}
