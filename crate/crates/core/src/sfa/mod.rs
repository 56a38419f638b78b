//! Pattern compilation: minterm alphabet, Thompson construction with a
//! skip-anything prefix, determinization and order-`m` disambiguation.

mod classical;
mod dfa;
mod disambiguate;
mod export;
mod nfa;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraError, MintermSet, SatOracle};
use crate::pattern::PatternSpec;

pub use classical::{relabel_to_classical, symbol_for, ClassicalDfa};
pub use dfa::{determinize, SymbolicDfa};
pub use disambiguate::{disambiguate, DisambiguatedDfa, DEFAULT_STATE_CAP};
pub use export::{AutomatonDump, StateDump};
pub use nfa::{Guard, SymbolicNfa};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfaError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("no guard for variable `{0}`")]
    MissingGuard(String),
    #[error("empty regular expression")]
    EmptyExpression,
    #[error("disambiguation to order {order} exceeds the cap of {cap} states")]
    StateCapExceeded { cap: usize, order: usize },
}

/// Minterm alphabet of a pattern: atoms of all bindings followed by the
/// extra features.
pub fn alphabet_for(spec: &PatternSpec, oracle: SatOracle) -> Result<Arc<MintermSet>, SfaError> {
    Ok(Arc::new(MintermSet::new(spec.predicates(), oracle)?))
}

/// Minterms of `alphabet` satisfying each variable's binding. A binding
/// lifts to every refined minterm that implies it.
pub fn guards_for(
    spec: &PatternSpec,
    alphabet: &MintermSet,
) -> Result<HashMap<String, Vec<usize>>, SfaError> {
    spec.bindings
        .iter()
        .map(|(v, f)| Ok((v.clone(), alphabet.guard(f)?)))
        .collect()
}

/// The streaming NFA for `Σ*·R`.
pub fn compile_snfa(spec: &PatternSpec, oracle: SatOracle) -> Result<SymbolicNfa, SfaError> {
    let alphabet = alphabet_for(spec, oracle)?;
    let guards = guards_for(spec, &alphabet)?;
    SymbolicNfa::thompson(&spec.ast, &guards, alphabet, true)
}

/// A fully compiled pattern with state counts from each stage.
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    pub nfa_states: usize,
    pub dfa_states: usize,
    pub automaton: DisambiguatedDfa,
}

pub fn compile(
    spec: &PatternSpec,
    oracle: SatOracle,
    order: usize,
    state_cap: usize,
) -> Result<CompiledPattern, SfaError> {
    let nfa = compile_snfa(spec, oracle)?;
    let dfa = determinize(&nfa);
    let dfa_states = dfa.num_states();
    let automaton = disambiguate(&dfa, order, state_cap)?;
    Ok(CompiledPattern {
        nfa_states: nfa.num_states,
        dfa_states,
        automaton,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Event;
    use crate::geo::{builtin_registry, destination, GeoContext, GeoPoint};
    use crate::pattern::{parse_pattern, PatternAst, PredicateRegistry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `a · b · b · b` where `a` is `sym = A` and `b` its negation: one
    /// predicate, minterm 0 = b, minterm 1 = a.
    const ABBB: &str = "a · b · b · b WHERE Eq(a, sym, A) AND NOT Eq(b, sym, A)";
    const A: usize = 1;
    const B: usize = 0;

    fn abbb_dfa() -> SymbolicDfa {
        let spec = parse_pattern(ABBB, &PredicateRegistry::generic()).unwrap();
        determinize(&compile_snfa(&spec, SatOracle::default()).unwrap())
    }

    fn sym(s: &str) -> Event {
        Event::new(0, "p").with("sym", s)
    }

    #[test]
    fn abbb_dfa_structure() {
        let dfa = abbb_dfa();
        assert_eq!(dfa.num_states(), 5);
        assert_eq!(dfa.finals, vec![false, false, false, false, true]);
        assert_eq!(dfa.next(1, A), 1);
        assert_eq!(dfa.next(1, B), 2);
        // full table for the skip-prefixed a·b·b·b automaton
        let expected = [[0, 1], [2, 1], [3, 1], [4, 1], [0, 1]];
        for (q, row) in expected.iter().enumerate() {
            assert_eq!(dfa.row(q), row, "state {q}");
        }
    }

    #[test]
    fn step_and_replay() {
        let dfa = abbb_dfa();
        assert_eq!(dfa.step(3, &sym("B")).unwrap(), (4, true));
        let mut q = dfa.initial;
        let mut hits = Vec::new();
        for (i, s) in ["A", "B", "B", "B"].iter().enumerate() {
            let (n, det) = dfa.step(q, &sym(s)).unwrap();
            q = n;
            if det {
                hits.push(i + 1);
            }
        }
        assert_eq!(hits, vec![4]);
        assert!(dfa.step(0, &Event::new(0, "p")).is_err());
    }

    #[test]
    fn dead_state_absorbs() {
        let spec = parse_pattern(ABBB, &PredicateRegistry::generic()).unwrap();
        let alphabet = alphabet_for(&spec, SatOracle::default()).unwrap();
        let guards = guards_for(&spec, &alphabet).unwrap();
        let nfa = SymbolicNfa::thompson(&spec.ast, &guards, alphabet, false).unwrap();
        let dfa = determinize(&nfa);
        let dead = dfa.dead_states();
        assert_eq!(dead.len(), 1);
        let d = dead[0];
        for s in ["A", "B"] {
            assert_eq!(dfa.step(d, &sym(s)).unwrap(), (d, false));
        }
    }

    #[test]
    fn single_leaf_true_pattern() {
        let spec = parse_pattern("x WHERE True(x)", &PredicateRegistry::generic()).unwrap();
        let c = compile(&spec, SatOracle::default(), 0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(c.automaton.num_states(), 2);
        let dfa = &c.automaton.dfa;
        assert!(!dfa.is_final(dfa.initial));
        assert!(dfa.accepts(&[0]));
        assert!(dfa.accepts(&[0, 0, 0]));
    }

    #[test]
    fn determinize_is_idempotent_up_to_isomorphism() {
        let dfa = abbb_dfa();
        // feed the DFA back as an NFA
        let mut transitions = Vec::new();
        for q in 0..dfa.num_states() {
            for m in 0..dfa.num_minterms() {
                transitions.push((q, Guard::Minterm(m), dfa.next(q, m)));
            }
        }
        let nfa = SymbolicNfa {
            alphabet: dfa.alphabet.clone(),
            num_states: dfa.num_states(),
            initial: dfa.initial,
            finals: (0..dfa.num_states()).filter(|&q| dfa.is_final(q)).collect(),
            transitions,
        };
        let again = determinize(&nfa);
        assert_eq!(again.num_states(), dfa.num_states());
        // breadth-first renumbering of a BFS-numbered DFA is the identity
        for q in 0..dfa.num_states() {
            assert_eq!(again.row(q), dfa.row(q));
            assert_eq!(again.is_final(q), dfa.is_final(q));
        }
    }

    #[test]
    fn dfa_matches_nfa_on_random_streams() {
        let reg = PredicateRegistry::generic();
        let spec = parse_pattern(
            "x · (y | z)* · x WHERE Between(x, v, 0, 5) AND Between(y, v, 3, 8) AND NOT Between(z, v, 0, 5)",
            &reg,
        )
        .unwrap();
        let nfa = compile_snfa(&spec, SatOracle::default()).unwrap();
        let dfa = determinize(&nfa);
        let k = dfa.num_minterms();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let word: Vec<usize> = (0..50).map(|_| rng.gen_range(0..k)).collect();
            // NFA oracle: track the subset incrementally over every prefix
            let mut q = dfa.initial;
            for n in 0..=word.len() {
                if n > 0 {
                    q = dfa.next(q, word[n - 1]);
                }
                if n % 7 == 0 || n == word.len() {
                    assert_eq!(dfa.is_final(q), nfa.accepts(&word[..n]));
                }
            }
        }
    }

    #[test]
    fn order_zero_is_identity() {
        let dfa = abbb_dfa();
        let d = disambiguate(&dfa, 0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(d.num_states(), 5);
        assert!((0..5).all(|q| d.annotation(q).is_none()));
    }

    /// δ^{-m}(q): every length-m word w such that δ(p, w) = q for some p.
    fn incoming_words(dfa: &SymbolicDfa, m: usize) -> Vec<std::collections::BTreeSet<Vec<usize>>> {
        let k = dfa.num_minterms();
        let mut out = vec![std::collections::BTreeSet::new(); dfa.num_states()];
        let total = k.pow(m as u32);
        for p in 0..dfa.num_states() {
            for code in 0..total {
                let mut w = Vec::with_capacity(m);
                let mut c = code;
                for _ in 0..m {
                    w.push(c % k);
                    c /= k;
                }
                let q = w.iter().fold(p, |s, &x| dfa.next(s, x));
                out[q].insert(w);
            }
        }
        out
    }

    #[test]
    fn order_one_splits_abbb() {
        let dfa = abbb_dfa();
        let before = incoming_words(&dfa, 1);
        // state 0 is entered by b, and is also the start state
        assert_eq!(before[1].len(), 1);
        let d = disambiguate(&dfa, 1, DEFAULT_STATE_CAP).unwrap();
        let after = incoming_words(&d.dfa, 1);
        for (q, words) in after.iter().enumerate() {
            assert!(words.len() <= 1, "state {q}: {words:?}");
            if let Some(word) = words.iter().next() {
                assert_eq!(d.annotation(q), Some(word.as_slice()));
            }
        }
        assert_eq!(d.num_states(), 6);
        for len in 0..=10 {
            for code in 0..1usize << len {
                let w: Vec<usize> = (0..len).map(|i| code >> i & 1).collect();
                assert_eq!(d.dfa.accepts(&w), dfa.accepts(&w));
            }
        }
    }

    #[test]
    fn random_dfa_order_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reg = PredicateRegistry::generic();
        let spec = parse_pattern("x WHERE Eq(x, s, A)", &reg).unwrap();
        let alphabet = alphabet_for(&spec, SatOracle::default()).unwrap();
        for _ in 0..20 {
            let table: Vec<Vec<usize>> = (0..4)
                .map(|_| (0..2).map(|_| rng.gen_range(0..4)).collect())
                .collect();
            let finals: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.4)).collect();
            let dfa = SymbolicDfa::from_table(alphabet.clone(), 0, finals, table);
            let d = disambiguate(&dfa, 2, DEFAULT_STATE_CAP).unwrap();
            for words in incoming_words(&d.dfa, 2) {
                assert!(words.len() <= 1);
            }
            for len in 0..=10 {
                for code in 0..1usize << len {
                    let w: Vec<usize> = (0..len).map(|i| code >> i & 1).collect();
                    assert_eq!(d.dfa.accepts(&w), dfa.accepts(&w));
                }
            }
        }
    }

    #[test]
    fn state_cap_fails_loudly() {
        let dfa = abbb_dfa();
        assert_eq!(
            disambiguate(&dfa, 3, 4).unwrap_err(),
            SfaError::StateCapExceeded { cap: 4, order: 3 }
        );
    }

    #[test]
    fn relabelling_preserves_structure() {
        let reg = PredicateRegistry::generic();
        let spec = parse_pattern("x · y+ WHERE Eq(x, s, A) AND Eq(y, t, B)", &reg).unwrap();
        let dfa = determinize(&compile_snfa(&spec, SatOracle::default()).unwrap());
        assert_eq!(dfa.num_minterms(), 4);
        let classical = relabel_to_classical(&dfa);
        assert_eq!(classical.symbols, vec!["a1", "a2", "a3", "a4"]);
        assert_eq!(classical.delta.len(), dfa.num_states());

        let single = parse_pattern("x WHERE True(x)", &reg).unwrap();
        let one = determinize(&compile_snfa(&single, SatOracle::default()).unwrap());
        assert_eq!(relabel_to_classical(&one).symbols, vec!["a1"]);

        // independent interpreter over the relabelled automaton
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let len = rng.gen_range(0..15);
            let events: Vec<Event> = (0..len)
                .map(|_| {
                    Event::new(0, "p")
                        .with("s", if rng.gen_bool(0.5) { "A" } else { "Z" })
                        .with("t", if rng.gen_bool(0.5) { "B" } else { "Z" })
                })
                .collect();
            let mut q = dfa.initial;
            let mut symbols = Vec::new();
            for e in &events {
                let m = dfa.alphabet.classify_index(e).unwrap();
                symbols.push(symbol_for(m));
                q = dfa.step(q, e).unwrap().0;
            }
            assert_eq!(classical.accepts(&symbols), Some(dfa.is_final(q)));
        }
    }

    /// Does `ast` match the whole of `word`? Backtracking over positions.
    fn matches(ast: &PatternAst, guards: &HashMap<String, Vec<usize>>, word: &[usize]) -> bool {
        ends(ast, guards, word, 0).contains(&word.len())
    }

    fn ends(
        ast: &PatternAst,
        guards: &HashMap<String, Vec<usize>>,
        word: &[usize],
        start: usize,
    ) -> Vec<usize> {
        match ast {
            PatternAst::Leaf(v) => {
                if start < word.len() && guards[v].contains(&word[start]) {
                    vec![start + 1]
                } else {
                    vec![]
                }
            }
            PatternAst::Concat(parts) => {
                let mut cur = vec![start];
                for p in parts {
                    let mut next: Vec<usize> =
                        cur.iter().flat_map(|&s| ends(p, guards, word, s)).collect();
                    next.sort_unstable();
                    next.dedup();
                    cur = next;
                }
                cur
            }
            PatternAst::Union(alts) => {
                let mut out: Vec<usize> = alts
                    .iter()
                    .flat_map(|a| ends(a, guards, word, start))
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            }
            PatternAst::Star(inner) | PatternAst::Plus(inner) => {
                let mut reached = if matches!(ast, PatternAst::Star(_)) {
                    vec![start]
                } else {
                    vec![]
                };
                let mut frontier = vec![start];
                while let Some(s) = frontier.pop() {
                    for e in ends(inner, guards, word, s) {
                        if e > s && !reached.contains(&e) {
                            reached.push(e);
                            frontier.push(e);
                        }
                    }
                }
                reached
            }
        }
    }

    #[test]
    fn approaching_pattern_matches_regex_oracle() {
        let port = GeoPoint::new(-4.49, 48.38);
        let mut ctx = GeoContext::default();
        ctx.points.insert("PortCoords".into(), port);
        let spec = parse_pattern(
            "x · y+ · z WHERE Distance(x, PortCoords, 7.0, 10.0) AND Distance(y, PortCoords, 5.0, 7.0) AND WithinCircle(z, PortCoords, 5.0)",
            &builtin_registry(ctx),
        )
        .unwrap();
        let oracle = SatOracle::IntervalPruning;
        let alphabet = alphabet_for(&spec, oracle).unwrap();
        assert!(alphabet.len() <= 8);
        let guards = guards_for(&spec, &alphabet).unwrap();
        let dfa = determinize(&compile_snfa(&spec, oracle).unwrap());
        let k = alphabet.len();
        for len in 0..=8usize {
            for code in 0..k.pow(len as u32) {
                let mut c = code;
                let word: Vec<usize> = (0..len)
                    .map(|_| {
                        let x = c % k;
                        c /= k;
                        x
                    })
                    .collect();
                let expected = (0..=len).any(|s| matches(&spec.ast, &guards, &word[s..]));
                assert_eq!(dfa.accepts(&word), expected, "{word:?}");
            }
        }
        // a concrete approach-then-enter trajectory is detected on the last event
        let ev = |km: f64| {
            let p = destination(port, 30.0, km);
            Event::new(0, "v").with("lon", p.lon).with("lat", p.lat)
        };
        let mut q = dfa.initial;
        let mut detections = Vec::new();
        for (i, km) in [12.0, 8.0, 6.5, 6.0, 5.5, 3.0].into_iter().enumerate() {
            let (n, det) = dfa.step(q, &ev(km)).unwrap();
            q = n;
            if det {
                detections.push(i);
            }
        }
        assert_eq!(detections, vec![5]);
    }

    #[test]
    fn export_lists_every_state() {
        let d = disambiguate(&abbb_dfa(), 1, DEFAULT_STATE_CAP).unwrap();
        let dump = AutomatonDump::new(&d);
        assert_eq!(dump.states.len(), d.num_states());
        let back: AutomatonDump = serde_json::from_str(&dump.to_json()).unwrap();
        assert_eq!(back, dump);
        assert!(dump.to_text().contains("order 1"));
    }
}
