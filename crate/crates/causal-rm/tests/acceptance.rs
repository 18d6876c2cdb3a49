//! Acceptance gate: one test per shipping criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them).

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use causal_rm::alphabet::{label, Alphabet};
use causal_rm::automata::CausalDfa;
use causal_rm::envs::Gridworld;
use causal_rm::learn::{
    evaluate_policy, exact_solve, project_policy, reachable_pairs, simulate_policy_rate,
    steps_to_threshold, train_curve, LearnParams, Task,
};
use causal_rm::ltlf::{
    compile_tlcd, compile_to_dfa, parse_formula, CompiledFormula, Formula, Tlcd,
    DEFAULT_MAX_STATES,
};
use causal_rm::machines::{build_causal_prm, compute_product, Prm};

fn report<F: FnOnce()>(name: &str, body: F) {
    let outcome = catch_unwind(AssertUnwindSafe(body));
    println!(
        "acceptance [{name}]: {}",
        if outcome.is_ok() { "PASS" } else { "FAIL" }
    );
    if let Err(e) = outcome {
        resume_unwind(e);
    }
}

fn case_file(case: &str, file: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases").join(case).join(file);
    fs::read_to_string(p).unwrap()
}

fn case(name: &str) -> (Gridworld, Prm, Tlcd) {
    (
        Gridworld::from_text(&case_file(name, "map.txt")).unwrap(),
        Prm::from_text(&case_file(name, "prm.txt")).unwrap(),
        Tlcd::parse(&case_file(name, "tlcd.txt")).unwrap(),
    )
}

// ---------------------------------------------------------------------
// 1. Compiled DFAs agree with the direct semantics on every word of
//    length <= 6 over each case-study formula's alphabet.
// ---------------------------------------------------------------------

/// Checks every word of length <= `max_len` by direct enumeration.
fn brute_force_agreement(f: &Formula, alf: &Alphabet, max_len: usize) -> u64 {
    let dfa = compile_to_dfa(f, alf, DEFAULT_MAX_STATES).unwrap();
    let compiled = CompiledFormula::new(f, alf);
    let n_labels = alf.n_labels() as u32;
    let mut word: Vec<u32> = Vec::new();
    let mut checked = 0u64;
    for len in 0..=max_len {
        word.clear();
        word.resize(len, 0);
        loop {
            let mut q = dfa.initial();
            for &bits in &word {
                q = dfa.next(q, bits);
            }
            assert_eq!(
                dfa.is_accepting(q),
                compiled.eval(&word),
                "mismatch on {word:?} for {f}"
            );
            checked += 1;
            // Odometer over the label alphabet.
            let mut i = 0;
            loop {
                if i == len {
                    break;
                }
                word[i] += 1;
                if word[i] < n_labels {
                    break;
                }
                word[i] = 0;
                i += 1;
            }
            if i == len {
                break;
            }
        }
    }
    checked
}

/// Checks every word of length <= `max_len` by sharing work across common
/// suffixes: the pair (per-subformula truth values, DFA end-state map) of a
/// suffix determines the verdicts of every extension, so each distinct pair
/// is expanded once. Returns (words covered, distinct suffix states).
fn memoized_agreement(f: &Formula, alf: &Alphabet, max_len: usize) -> (f64, usize) {
    let dfa = compile_to_dfa(f, alf, DEFAULT_MAX_STATES).unwrap();
    let compiled = CompiledFormula::new(f, alf);
    let n_labels = alf.n_labels() as u32;
    let n_q = dfa.n_states();

    // state = (formula values of the suffix, state -> state map of the
    // suffix); prepending a letter updates both in lockstep.
    let initial_map: Vec<u8> = (0..n_q as u8).collect();
    let start = (compiled.empty_mask(), initial_map);
    let mut seen: HashSet<(u64, Vec<u8>)> = HashSet::new();
    let mut frontier = vec![start.clone()];
    seen.insert(start);
    // Every word of every length up to max_len is covered: a word whose
    // suffix state already exists shares the (already checked) verdict of
    // that state, so the expansion below can stop once no new states appear.
    let covered = (0..=max_len as i32)
        .map(|l| (n_labels as f64).powi(l))
        .sum::<f64>();
    for len in 1..=max_len {
        let mut next_frontier = Vec::new();
        for (mask, map) in frontier {
            for bits in 0..n_labels {
                let mask2 = compiled.prepend_mask(bits, mask);
                let map2: Vec<u8> = (0..n_q)
                    .map(|q| map[dfa.next(q, bits) as usize])
                    .collect();
                let formula_verdict = compiled.mask_holds(mask2);
                let dfa_verdict = dfa.is_accepting(map2[dfa.initial()] as usize);
                assert_eq!(formula_verdict, dfa_verdict, "mismatch at suffix depth {len} for {f}");
                let state = (mask2, map2);
                if seen.insert(state.clone()) {
                    next_frontier.push(state);
                }
            }
        }
        frontier = next_frontier;
        if frontier.is_empty() {
            break;
        }
    }
    (covered, seen.len())
}

#[test]
fn criterion_1_compiler_soundness() {
    report("1: LTLf compiler exhaustive soundness, words up to length 6", || {
        let small: [(&str, &[&str]); 3] = [
            ("G (s -> (!o W f))", &["s", "o", "f"]),
            ("G (a -> G !b)", &["a", "b"]),
            ("G (d -> G !(a | b | c))", &["a", "b", "c", "d"]),
        ];
        for (text, props) in small {
            let alf = Alphabet::new(props.iter().copied()).unwrap();
            let f = parse_formula(text, &alf).unwrap();
            let direct = brute_force_agreement(&f, &alf, 6);
            let (covered, _) = memoized_agreement(&f, &alf, 6);
            assert_eq!(direct as f64, covered, "the two enumerations disagree on word count");
        }
        // The office diagram has five propositions (32^6 length-6 words),
        // so only the suffix-sharing enumeration is feasible; it was
        // validated against direct enumeration on the three formulas above.
        let office = Tlcd::parse(&case_file("office", "tlcd.txt")).unwrap();
        let (covered, states) = memoized_agreement(&office.to_formula(), office.alphabet(), 6);
        assert!(covered > 1.1e9, "expected about 1.1e9 words, covered {covered}");
        assert!(states > 0);
    });
}

// ---------------------------------------------------------------------
// 2. The compiled coffee-soda factor DFAs are language-equivalent to the
//    hand-transcribed ones, and composition equals conjunction.
// ---------------------------------------------------------------------

fn sof() -> Alphabet {
    Alphabet::new(["s", "o", "f"]).unwrap()
}

/// Hand transcription of the soda automaton: u0 idle, u1 waiting for the
/// flower pot with the office forbidden, u2 discharged (published drawings
/// give it a plain self-loop; behaviorally it readmits triggers like u0,
/// which is what language equivalence requires), u3 rejecting sink.
fn hand_soda_dfa() -> CausalDfa {
    let alf = sof();
    let s = 1u32 << alf.position("s").unwrap();
    let o = 1u32 << alf.position("o").unwrap();
    let f = 1u32 << alf.position("f").unwrap();
    let idle_row = |bits: u32, home: usize| -> usize {
        if bits & s == 0 {
            home // no trigger
        } else if bits & f != 0 {
            2 // discharged in place
        } else if bits & o != 0 {
            3 // office together with the trigger
        } else {
            1
        }
    };
    let mut delta = vec![vec![0usize; 8]; 4];
    for bits in 0..8u32 {
        delta[0][bits as usize] = idle_row(bits, 0);
        delta[1][bits as usize] = if bits & f != 0 {
            2
        } else if bits & o != 0 {
            3
        } else {
            1
        };
        delta[2][bits as usize] = idle_row(bits, 2);
        delta[3][bits as usize] = 3;
    }
    CausalDfa::new(alf, 0, delta, vec![true, true, true, false])
}

/// Hand transcription of the flower-pot automaton: t0 idle, t1 with the
/// office forbidden forever, t2 rejecting sink.
fn hand_pot_dfa() -> CausalDfa {
    let alf = sof();
    let o = 1u32 << alf.position("o").unwrap();
    let f = 1u32 << alf.position("f").unwrap();
    let mut delta = vec![vec![0usize; 8]; 3];
    for bits in 0..8u32 {
        delta[0][bits as usize] = if bits & f != 0 {
            if bits & o != 0 { 2 } else { 1 }
        } else {
            0
        };
        delta[1][bits as usize] = if bits & o != 0 { 2 } else { 1 };
        delta[2][bits as usize] = 2;
    }
    CausalDfa::new(alf, 0, delta, vec![true, true, false])
}

#[test]
fn criterion_2_known_automata() {
    report("2: compiled DFAs match the hand-transcribed coffee-soda automata", || {
        let alf = sof();
        let soda = parse_formula("G (s -> (!o W f))", &alf).unwrap();
        let pot = parse_formula("G (f -> G !o)", &alf).unwrap();

        let hand_soda = hand_soda_dfa();
        assert_eq!(hand_soda.n_states(), 4);
        let compiled_soda = compile_to_dfa(&soda, &alf, DEFAULT_MAX_STATES).unwrap();
        assert!(
            compiled_soda.language_equiv(&hand_soda),
            "witness: {:?}",
            compiled_soda.distinguishing_word(&hand_soda)
        );

        let hand_pot = hand_pot_dfa();
        assert_eq!(hand_pot.n_states(), 3);
        let compiled_pot = compile_to_dfa(&pot, &alf, DEFAULT_MAX_STATES).unwrap();
        assert!(
            compiled_pot.language_equiv(&hand_pot),
            "witness: {:?}",
            compiled_pot.distinguishing_word(&hand_pot)
        );

        // Spot checks straight off the drawings.
        assert_eq!(
            hand_soda.run(&[label(["s"]), label(["o"])]).unwrap(),
            vec![0, 1, 3]
        );
        assert!(!hand_soda.accepts(&[label(["s"]), label(["o"])]).unwrap());
        assert_eq!(
            hand_soda.run(&[label(["s"]), label(["f"]), label(["o"])]).unwrap(),
            vec![0, 1, 2, 2]
        );
        assert!(!hand_soda.language_equiv(&hand_pot));

        // Parallel composition equals the conjunction formula.
        let both = hand_soda.compose_parallel(&hand_pot);
        let conjunction = Formula::and(vec![soda, pot]);
        let compiled_both = compile_to_dfa(&conjunction, &alf, DEFAULT_MAX_STATES).unwrap();
        assert!(
            both.language_equiv(&compiled_both),
            "witness: {:?}",
            both.distinguishing_word(&compiled_both)
        );
        assert!(both.accepts(&[label(["s"]), label(["f"])]).unwrap());
        assert!(!both.accepts(&[label(["f"]), label(["o"])]).unwrap());
    });
}

// ---------------------------------------------------------------------
// 3. Machine state values and the minimal reward on coffee-soda.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_state_values_and_minimal_reward() {
    report("3: coffee-soda machine values and minimal reward", || {
        let machine = Prm::from_text(&case_file("coffee_soda", "prm.txt")).unwrap();
        let v = machine.value_iteration(0.9, 1e-12).values;
        let expected = [0.9, 1.0, 0.1, 1.0, 0.0];
        for (q, want) in expected.iter().enumerate() {
            assert!((v[q] - want).abs() < 1e-8, "v(q{q}) = {} instead of {want}", v[q]);
        }
        assert!((machine.minimal_reward(0.9) + 3.0).abs() < 1e-8);
    });
}

// ---------------------------------------------------------------------
// 4. The causal product adds exactly the dead soda-branch states as
//    terminals and punishes sink-entering transitions.
// ---------------------------------------------------------------------

#[test]
fn criterion_4_product_terminals() {
    report("4: coffee-soda causal product terminals and sink rewards", || {
        let (_, machine, cd) = case("coffee_soda");
        let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES).unwrap();
        let build = build_causal_prm(&machine, &dfa, 0.9);

        // In the minimized automaton the states reached by "soda" and by
        // "soda then flower pot" coincide (both forbid the office forever),
        // so the two dead branch states named by the construction share one
        // automaton component.
        let after_s = dfa.state_after(&[label(["s"])]).unwrap();
        let after_sf = dfa.state_after(&[label(["s"]), label(["f"])]).unwrap();
        assert_eq!(after_s, after_sf);
        assert!(build.added_terminals.contains(&build.product.pair_id(3, after_s)));
        assert!(build.added_terminals.contains(&build.product.pair_id(3, after_sf)));
        assert!(!build.added_terminals.contains(&build.product.pair_id(0, dfa.initial())));

        // Exactly the non-terminal machine states paired with the
        // office-forbidden automaton state become terminal.
        let mut expected: Vec<usize> =
            (0..4).map(|q| build.product.pair_id(q, after_s)).collect();
        expected.sort_unstable();
        assert_eq!(build.added_terminals, expected);

        // Every transition into a sink-component state pays m.
        let prm = &build.product.prm;
        let mut sink_edges = 0;
        for x in 0..prm.n_states() {
            if prm.is_terminal(x) {
                continue;
            }
            for bits in 0..prm.alphabet().n_labels() as u32 {
                for o in prm.outcomes(x, bits) {
                    if build.product.sink_component[o.next] {
                        sink_edges += 1;
                        assert_eq!(o.reward, build.product.minimal_reward);
                    }
                }
            }
        }
        assert!(sink_edges > 0);
    });
}

// ---------------------------------------------------------------------
// 5. Optimal values and policies survive the product construction.
// ---------------------------------------------------------------------

#[test]
fn criterion_5_policy_preservation() {
    report("5: the causal product preserves optimal values and policies", || {
        for name in ["coffee_soda", "two_doors"] {
            let (env, machine, cd) = case(name);
            let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES).unwrap();
            let build = build_causal_prm(&machine, &dfa, 0.9);

            let base_task = Task::new(&env, &machine);
            let base = exact_solve(&base_task, 0.9, 1e-12);
            let causal_task = Task::new(&env, &build.product.prm);
            let causal = exact_solve(&causal_task, 0.9, 1e-12);

            let v_base = base.value(env.start(), machine.initial());
            let v_causal = causal.value(env.start(), build.product.prm.initial());
            assert!(
                (v_base - v_causal).abs() < 1e-6,
                "{name}: {v_base} vs {v_causal}"
            );

            // A greedy product policy projected back onto the original
            // machine is still optimal there.
            let projected = project_policy(&env, &build.product, &causal, machine.n_states());
            let v = evaluate_policy(&base_task, &projected, 0.9, 1e-12);
            let got = v[env.start() * machine.n_states() + machine.initial()];
            assert!((got - v_base).abs() < 1e-6, "{name}: projected policy yields {got}");
        }
    });
}

// ---------------------------------------------------------------------
// 6. Learning reaches 90% of the exact reward rate sooner with the
//    causal product, on all four case studies.
// ---------------------------------------------------------------------

const SEEDS: u64 = 20;

fn median_steps(task: &Task, total_steps: u64, threshold: f64) -> u64 {
    let mut firsts: Vec<u64> = (0..SEEDS)
        .map(|seed| {
            let curve = train_curve(task, LearnParams::default(), total_steps, 1000, 100, seed);
            steps_to_threshold(&curve, threshold).unwrap_or(u64::MAX)
        })
        .collect();
    firsts.sort_unstable();
    firsts[firsts.len() / 2]
}

/// The reference rate: the exact greedy policy of the causal configuration
/// replayed with the learner's own exploration noise and episode cap.
fn reference_rate(env: &Gridworld, causal_prm: &Prm) -> f64 {
    let task = Task::new(env, causal_prm);
    let sol = exact_solve(&task, 0.9, 1e-12);
    simulate_policy_rate(&task, &sol.policy, 0.1, 400, 200_000, 12345)
}

fn case_budget(name: &str) -> u64 {
    match name {
        "coffee_soda" => 150_000,
        "two_doors" => 80_000,
        "four_doors" => 300_000,
        _ => 500_000,
    }
}

#[test]
fn criterion_6_learning_speed() {
    report("6: the causal configuration reaches 90% of the exact rate first", || {
        for name in ["coffee_soda", "two_doors", "four_doors", "office"] {
            let (env, machine, cd) = case(name);
            let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES).unwrap();
            let build = build_causal_prm(&machine, &dfa, 0.9);
            let threshold = 0.9 * reference_rate(&env, &build.product.prm);

            let budget = case_budget(name);
            let causal_task = Task::new(&env, &build.product.prm);
            let causal = median_steps(&causal_task, budget, threshold);
            let base_task = Task::new(&env, &machine);
            let baseline = median_steps(&base_task, budget, threshold);
            assert!(
                causal < baseline,
                "{name}: causal median {causal} vs baseline median {baseline} (threshold {threshold})"
            );
        }
    });
}

// ---------------------------------------------------------------------
// 7. A redundant diagram scales the state space but not the values or
//    the learning curves.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_redundant_diagram() {
    report("7: a redundant sink-free diagram does not hurt", || {
        let (env, machine, cd) = case("coffee_soda");
        let redundant = Tlcd::parse(&case_file("coffee_soda", "redundant.txt")).unwrap();
        assert_eq!(env.tlcd_holds(&redundant, 10).unwrap(), Ok(()));

        let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES).unwrap();
        let red_dfa = compile_tlcd(&redundant, DEFAULT_MAX_STATES).unwrap();
        let k = red_dfa.n_states();
        assert!(k > 1, "the redundant automaton should not be trivial");
        assert!((0..k).all(|q| !red_dfa.is_rejecting_sink(q)));

        let build = build_causal_prm(&machine, &dfa, 0.9);
        let stacked = build_causal_prm(&build.product.prm, &red_dfa, 0.9);
        assert_eq!(
            stacked.product.prm.n_states(),
            build.product.prm.n_states() * k
        );

        let causal_task = Task::new(&env, &build.product.prm);
        let stacked_task = Task::new(&env, &stacked.product.prm);
        let v1 = exact_solve(&causal_task, 0.9, 1e-12)
            .value(env.start(), build.product.prm.initial());
        let v2 = exact_solve(&stacked_task, 0.9, 1e-12)
            .value(env.start(), stacked.product.prm.initial());
        assert!((v1 - v2).abs() < 1e-6, "{v1} vs {v2}");

        let threshold = 0.9 * reference_rate(&env, &build.product.prm);
        let budget = case_budget("coffee_soda");
        let plain = median_steps(&causal_task, budget, threshold) as f64;
        let with_redundant = median_steps(&stacked_task, budget, threshold) as f64;
        assert!(
            (with_redundant - plain).abs() <= 0.25 * plain,
            "medians {plain} vs {with_redundant} differ by more than 25%"
        );
    });
}

// ---------------------------------------------------------------------
// 8. Rewrites confined to unreachable product states do not move any
//    reachable optimal value.
// ---------------------------------------------------------------------

#[test]
fn criterion_8_unreachable_rewrites() {
    report("8: rewrites on unreachable product states leave reachable values alone", || {
        let (env, machine, cd) = case("coffee_soda");
        let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES).unwrap();
        let build = build_causal_prm(&machine, &dfa, 0.9);
        let plain = compute_product(&machine, &dfa, machine.minimal_reward(0.9));

        let task = Task::new(&env, &plain.prm);
        let reach = reachable_pairs(&task);
        let n = plain.prm.n_states();
        let machine_reachable: Vec<bool> = (0..n)
            .map(|x| (0..env.n_cells()).any(|cell| reach[cell * n + x]))
            .collect();
        let unreachable: Vec<usize> =
            (0..n).filter(|&x| !machine_reachable[x]).collect();
        assert!(!unreachable.is_empty(), "the perturbation targets are vacuous");

        let baseline = exact_solve(&task, 0.9, 1e-12);
        let same_reachable_values = |candidate: &Prm, what: &str| {
            let t = Task::new(&env, candidate);
            let sol = exact_solve(&t, 0.9, 1e-12);
            for cell in 0..env.n_cells() {
                for x in 0..n {
                    if !reach[cell * n + x] {
                        continue;
                    }
                    let (a, b) = (baseline.value(cell, x), sol.value(cell, x));
                    assert!(
                        (a - b).abs() < 1e-6,
                        "{what}: value at (cell {cell}, state {x}) moved from {a} to {b}"
                    );
                }
            }
        };

        for alpha in [-5.0, 0.0, 7.0] {
            same_reachable_values(
                &plain.prm.with_rewards_into(&unreachable, alpha),
                &format!("rewards into unreachable states set to {alpha}"),
            );
        }
        same_reachable_values(
            &plain.prm.with_extra_terminals(&build.added_terminals),
            "zero-value states marked terminal",
        );
    });
}
