//! Pattern Markov chains: transition-matrix learning, waiting-time
//! distributions and forecast intervals.

mod chain;
mod forecast;
mod waiting;

use thiserror::Error;

use crate::algebra::AlgebraError;

pub use chain::{LearnOptions, Learned, PatternMarkovChain, ROW_SUM_TOLERANCE};
pub use forecast::{forecast_interval, prefix_mass, Forecast, ForecastTable, MASS_EPS};
pub use waiting::{
    waiting_time_distribution, waiting_time_from_distribution, Horizon, WaitingTimeDistribution,
    AUTO_HORIZON_MASS, MAX_AUTO_HORIZON,
};

#[derive(Debug, Error)]
pub enum PmcError {
    #[error("training stream is empty")]
    EmptyTraining,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("row {row} is not stochastic")]
    NotStochastic { row: usize },
    #[error("final row {row} is not absorbing")]
    NotAbsorbing { row: usize },
    #[error("malformed chain: {0}")]
    Malformed(String),
    #[error("chain JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("state {0} is final; its waiting time is zero")]
    FinalStateQuery(usize),
    #[error("horizon must be at least 1, got {0}")]
    InvalidHorizon(usize),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("horizon too short to reach the threshold for state(s) {states:?}")]
    HorizonTooShort { states: Vec<usize> },
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::algebra::{MintermSet, SatOracle};
    use crate::pattern::{parse_pattern, PredicateRegistry};
    use crate::sfa::{compile, compile_snfa, determinize, DisambiguatedDfa, SymbolicDfa};

    const ABBB: &str = "a · b · b · b WHERE Eq(a, sym, A) AND NOT Eq(b, sym, A)";
    const A: usize = 1;

    fn abbb() -> DisambiguatedDfa {
        let spec = parse_pattern(ABBB, &PredicateRegistry::generic()).unwrap();
        DisambiguatedDfa::identity(determinize(
            &compile_snfa(&spec, SatOracle::default()).unwrap(),
        ))
    }

    fn iid(dfa: &DisambiguatedDfa, pa: f64) -> PatternMarkovChain {
        PatternMarkovChain::analytic(dfa, |_| vec![1.0 - pa, pa])
    }

    /// First-hit probability at exactly `n` steps by enumerating all words.
    fn first_hit_oracle(dfa: &SymbolicDfa, start: usize, n: usize, probs: &[f64]) -> f64 {
        let k = probs.len();
        let mut total = 0.0;
        let mut word = vec![0usize; n];
        'words: loop {
            let mut q = start;
            let mut w = 1.0;
            let mut hit_at = None;
            for (i, &m) in word.iter().enumerate() {
                w *= probs[m];
                q = dfa.next(q, m);
                if dfa.is_final(q) {
                    hit_at = Some(i + 1);
                    break;
                }
            }
            if hit_at == Some(n) {
                total += w;
            }
            for d in (0..n).rev() {
                word[d] += 1;
                if word[d] < k {
                    continue 'words;
                }
                word[d] = 0;
            }
            break;
        }
        total
    }

    /// Every interval, shortest first, then heavier, then earlier.
    fn brute_interval(probs: &[f64], theta: f64) -> Option<(usize, usize)> {
        let cum = prefix_mass(probs);
        let mut best: Option<(usize, usize, f64)> = None;
        for s in 1..=probs.len() {
            for e in s..=probs.len() {
                let m = cum[e] - cum[s - 1];
                if m < theta - MASS_EPS {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bs, be, bm)) => {
                        e - s < be - bs || (e - s == be - bs && (m > bm + MASS_EPS))
                    }
                };
                if better {
                    best = Some((s, e, m));
                }
            }
        }
        best.map(|(s, e, _)| (s, e))
    }

    fn dist(probs: Vec<f64>) -> WaitingTimeDistribution {
        let tail = 1.0 - probs.iter().sum::<f64>();
        WaitingTimeDistribution {
            state: 0,
            horizon: probs.len(),
            probs,
            tail_mass: tail,
        }
    }

    #[test]
    fn geometric_waiting_time() {
        let dfa = abbb();
        // a one-predicate alphabet: b keeps state 0, a goes to a final state
        let table = vec![vec![0, 1], vec![1, 1]];
        let two = SymbolicDfa::from_table(dfa.dfa.alphabet.clone(), 0, vec![false, true], table);
        let pmc = iid(&DisambiguatedDfa::identity(two), 0.5);
        let d = waiting_time_distribution(&pmc, 0, Horizon::Fixed(10)).unwrap();
        assert_eq!(d.probs[2], 0.125);
        for n in 1..=10 {
            assert!((d.probs[n - 1] - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn abbb_waiting_times_match_enumeration() {
        let dfa = abbb();
        let pmc = iid(&dfa, 0.5);
        let d = waiting_time_distribution(&pmc, 0, Horizon::Fixed(12)).unwrap();
        assert!((d.probs[3] - 1.0 / 16.0).abs() < 1e-15);
        for q in 0..4 {
            let d = waiting_time_distribution(&pmc, q, Horizon::Fixed(12)).unwrap();
            for n in 1..=12 {
                let o = first_hit_oracle(&dfa.dfa, q, n, &[0.5, 0.5]);
                assert!((d.probs[n - 1] - o).abs() < 1e-9, "state {q} n {n}");
            }
        }
    }

    #[test]
    fn waiting_time_conserves_mass() {
        let dfa = abbb();
        for pa in [0.1, 0.5, 0.9] {
            let pmc = iid(&dfa, pa);
            for q in 0..4 {
                for h in [1, 7, 50] {
                    let d = waiting_time_distribution(&pmc, q, Horizon::Fixed(h)).unwrap();
                    assert!(d.probs.iter().all(|&p| p >= 0.0));
                    assert!((d.total_mass() + d.tail_mass - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn waiting_time_rejects_bad_queries() {
        let pmc = iid(&abbb(), 0.5);
        assert!(matches!(
            waiting_time_distribution(&pmc, 4, Horizon::Fixed(3)),
            Err(PmcError::FinalStateQuery(4))
        ));
        assert!(matches!(
            waiting_time_distribution(&pmc, 9, Horizon::Fixed(3)),
            Err(PmcError::UnknownState(9))
        ));
        assert!(matches!(
            waiting_time_distribution(&pmc, 0, Horizon::Fixed(0)),
            Err(PmcError::InvalidHorizon(0))
        ));
    }

    #[test]
    fn auto_horizon_reaches_target_mass() {
        let pmc = iid(&abbb(), 0.5);
        let d = waiting_time_distribution(&pmc, 0, Horizon::Auto { theta: 0.5 }).unwrap();
        assert!(d.total_mass() >= AUTO_HORIZON_MASS);
        let shorter: f64 = d.probs[..d.horizon - 1].iter().sum();
        assert!(shorter < AUTO_HORIZON_MASS);
    }

    #[test]
    fn general_initial_distribution_matches_one_hot() {
        let pmc = iid(&abbb(), 0.3);
        let (p, tail) =
            waiting_time_from_distribution(&pmc, &[0.0, 0.0, 1.0, 0.0, 0.0], Horizon::Fixed(20))
                .unwrap();
        let d = waiting_time_distribution(&pmc, 2, Horizon::Fixed(20)).unwrap();
        assert_eq!(p, d.probs);
        assert_eq!(tail, d.tail_mass);
    }

    #[test]
    fn recurrence_matches_fresh_power() {
        let pmc = iid(&abbb(), 0.35);
        let d = waiting_time_distribution(&pmc, 1, Horizon::Fixed(40)).unwrap();
        let dense = pmc.to_dense();
        // ξ N^n (I - N) 1 recomputed over the transient block
        let transient = [0usize, 1, 2, 3];
        for n in [0usize, 5, 17, 39] {
            let mut v = [0.0, 1.0, 0.0, 0.0];
            for _ in 0..n {
                let mut w = [0.0; 4];
                for (i, &vi) in v.iter().enumerate() {
                    for (j, &tj) in transient.iter().enumerate() {
                        w[j] += vi * dense[transient[i]][tj];
                    }
                }
                v = w;
            }
            let exit: f64 = v
                .iter()
                .enumerate()
                .map(|(i, &vi)| {
                    vi * (1.0
                        - transient
                            .iter()
                            .map(|&t| dense[transient[i]][t])
                            .sum::<f64>())
                })
                .sum();
            let rel = (d.probs[n] - exit).abs() / exit.abs().max(f64::MIN_POSITIVE);
            assert!(rel < 1e-12, "n {n}: {} vs {exit}", d.probs[n]);
        }
    }

    #[test]
    fn interval_examples() {
        let f = forecast_interval(&dist(vec![0.1, 0.5, 0.3, 0.1]), 0.5).unwrap();
        assert_eq!((f.start, f.end, f.probability), (2, 2, 0.5));
        let f = forecast_interval(&dist(vec![0.25, 0.25, 0.25, 0.25]), 1.0).unwrap();
        assert_eq!((f.start, f.end), (1, 4));
        // equal length: heavier wins, then earlier
        let f = forecast_interval(&dist(vec![0.3, 0.1, 0.35, 0.25]), 0.3).unwrap();
        assert_eq!((f.start, f.end), (3, 3));
        let f = forecast_interval(&dist(vec![0.4, 0.2, 0.4]), 0.4).unwrap();
        assert_eq!((f.start, f.end), (1, 1));
        assert_eq!(brute_interval(&[0.4, 0.2, 0.4], 0.4), Some((1, 1)));
    }

    #[test]
    fn interval_errors() {
        assert!(matches!(
            forecast_interval(&dist(vec![0.2, 0.2]), 0.5),
            Err(PmcError::HorizonTooShort { .. })
        ));
        assert!(matches!(
            forecast_interval(&dist(vec![0.5]), 0.0),
            Err(PmcError::InvalidTheta(_))
        ));
        assert!(matches!(
            forecast_interval(&dist(vec![0.5]), 1.5),
            Err(PmcError::InvalidTheta(_))
        ));
    }

    #[test]
    fn state_one_interval_grows_rightwards() {
        let pmc = iid(&abbb(), 0.5);
        let d = waiting_time_distribution(&pmc, 1, Horizon::Fixed(30)).unwrap();
        let half = forecast_interval(&d, 0.5).unwrap();
        let more = forecast_interval(&d, 0.7).unwrap();
        assert!(half.start > 1 || half.end < 30);
        // two more b's are needed at least, so the first two steps carry no mass
        assert_eq!(d.probs[0], 0.0);
        assert_eq!(d.probs[1], 0.0);
        assert!(half.start >= 3 && more.start >= 3);
        assert!(more.end > half.end);
        assert!(more.start <= half.start);
        assert!(more.spread() >= half.spread());
    }

    #[test]
    fn abbb_table_has_four_entries() {
        let pmc = iid(&abbb(), 0.5);
        let table = ForecastTable::build(&pmc, 0.5, Horizon::Auto { theta: 0.5 }).unwrap();
        assert_eq!(table.len(), 4);
        assert!(table.get(4).is_none());
        let strict = ForecastTable::build(&pmc, 0.9, Horizon::Auto { theta: 0.9 }).unwrap();
        for q in 0..4 {
            assert!(strict.get(q).unwrap().spread() >= table.get(q).unwrap().spread());
        }
    }

    #[test]
    fn one_step_table() {
        let dfa = abbb();
        let two = SymbolicDfa::from_table(
            dfa.dfa.alphabet.clone(),
            0,
            vec![false, true],
            vec![vec![1, 1], vec![1, 1]],
        );
        let pmc = iid(&DisambiguatedDfa::identity(two), 0.5);
        let table = ForecastTable::build(&pmc, 0.8, Horizon::Fixed(5)).unwrap();
        let f = table.get(0).unwrap();
        assert_eq!((f.start, f.end, f.probability), (1, 1, 1.0));
    }

    #[test]
    fn table_reports_short_horizon() {
        let pmc = iid(&abbb(), 0.5);
        match ForecastTable::build(&pmc, 0.5, Horizon::Fixed(3)) {
            Err(PmcError::HorizonTooShort { states }) => assert_eq!(states, vec![0, 1, 2]),
            other => panic!("unexpected {other:?}"),
        }
        let (table, failed) = ForecastTable::build_lenient(&pmc, 0.5, Horizon::Fixed(3)).unwrap();
        assert_eq!(failed, vec![0, 1, 2]);
        assert_eq!(table.len(), 1);
    }

    fn two_state(dfa: &DisambiguatedDfa) -> DisambiguatedDfa {
        let t = SymbolicDfa::from_table(
            dfa.dfa.alphabet.clone(),
            0,
            vec![false, true],
            vec![vec![0, 1], vec![0, 1]],
        );
        DisambiguatedDfa::identity(t)
    }

    #[test]
    fn learn_counts_ratio() {
        let dfa = two_state(&abbb());
        let word = [A, A, A, 0, 0, 0, 0, 0, 0, 0];
        let learned =
            PatternMarkovChain::learn_from_words(&dfa, &[word], LearnOptions::default()).unwrap();
        assert_eq!(learned.pmc.get(0, 1), 0.3);
        assert_eq!(learned.pmc.get(0, 0), 0.7);
        assert_eq!(learned.pmc.get(1, 1), 1.0);
        assert!(learned.unvisited.is_empty());
        learned.pmc.validate().unwrap();
    }

    #[test]
    fn learn_single_self_loop() {
        let alphabet = Arc::new(MintermSet::new(Vec::new(), SatOracle::default()).unwrap());
        let dfa = DisambiguatedDfa::identity(SymbolicDfa::from_table(
            alphabet,
            0,
            vec![false],
            vec![vec![0]],
        ));
        let learned =
            PatternMarkovChain::learn_from_words(&dfa, &[[0, 0, 0]], LearnOptions::default())
                .unwrap();
        assert_eq!(learned.pmc.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn learn_rejects_empty() {
        let dfa = abbb();
        let empty: [Vec<usize>; 1] = [Vec::new()];
        assert!(matches!(
            PatternMarkovChain::learn_from_words(&dfa, &empty, LearnOptions::default()),
            Err(PmcError::EmptyTraining)
        ));
    }

    #[test]
    fn learn_unvisited_falls_back_to_uniform() {
        let dfa = abbb();
        let learned =
            PatternMarkovChain::learn_from_words(&dfa, &[[0, 0, 0]], LearnOptions::default())
                .unwrap();
        assert_eq!(learned.unvisited, vec![1, 2, 3]);
        assert_eq!(learned.pmc.get(2, 3), 0.5);
        assert_eq!(learned.pmc.get(2, 1), 0.5);
        learned.pmc.validate().unwrap();
    }

    #[test]
    fn laplace_smoothing_keeps_structure() {
        let dfa = abbb();
        let opts = LearnOptions {
            laplace: true,
            ..LearnOptions::default()
        };
        let learned = PatternMarkovChain::learn_from_words(&dfa, &[[0, 0, 0]], opts).unwrap();
        assert_eq!(learned.pmc.get(0, 0), 4.0 / 5.0);
        assert_eq!(learned.pmc.get(0, 1), 1.0 / 5.0);
        assert_eq!(learned.pmc.get(0, 2), 0.0);
        learned.pmc.validate().unwrap();
    }

    #[test]
    fn learn_iid_stream_is_close_to_analytic() {
        let spec = parse_pattern(ABBB, &PredicateRegistry::generic()).unwrap();
        for order in [0, 1] {
            let dfa = compile(&spec, SatOracle::default(), order, 1000)
                .unwrap()
                .automaton;
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let word: Vec<usize> = (0..100_000)
                .map(|_| usize::from(rng.gen_bool(0.7)))
                .collect();
            let learned =
                PatternMarkovChain::learn_from_words(&dfa, &[word], LearnOptions::default())
                    .unwrap();
            let truth = iid(&dfa, 0.7).to_dense();
            let got = learned.pmc.to_dense();
            for (r, t) in got.iter().zip(&truth) {
                assert!((r.iter().sum::<f64>() - 1.0).abs() < ROW_SUM_TOLERANCE);
                for (a, b) in r.iter().zip(t) {
                    assert!((a - b).abs() <= 0.02, "order {order}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn learn_from_events_per_partition() {
        use crate::algebra::Event;
        let dfa = abbb();
        let ev = |p: &str, s: &str| Event::new(0, p).with("sym", s);
        // interleaved, each partition alone spells a·b·b·b
        let stream = vec![
            ev("x", "A"),
            ev("y", "A"),
            ev("x", "B"),
            ev("y", "B"),
            ev("x", "B"),
            ev("y", "B"),
            ev("x", "B"),
            ev("y", "B"),
        ];
        let learned =
            PatternMarkovChain::learn(&dfa, &stream, "partitionKey", LearnOptions::default())
                .unwrap();
        assert_eq!(learned.pmc.counts(3), &[(4, 2)]);
        let pooled = PatternMarkovChain::learn(
            &dfa,
            &stream,
            "partitionKey",
            LearnOptions {
                per_partition: false,
                ..LearnOptions::default()
            },
        )
        .unwrap();
        // pooled: A A B B B then three B after the reset
        assert_eq!(pooled.pmc.counts(3), &[(4, 1)]);
        assert_eq!(pooled.pmc.counts(0), &[(0, 3), (1, 1)]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dfa = abbb();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let word: Vec<usize> = (0..997).map(|_| usize::from(rng.gen_bool(0.37))).collect();
        let pmc = PatternMarkovChain::learn_from_words(&dfa, &[word], LearnOptions::default())
            .unwrap()
            .pmc;
        let back = PatternMarkovChain::from_json(&pmc.to_json()).unwrap();
        for (a, b) in pmc
            .to_dense()
            .iter()
            .flatten()
            .zip(back.to_dense().iter().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, pmc);
    }

    #[test]
    fn json_rejects_bad_matrices() {
        assert!(
            PatternMarkovChain::from_json(r#"{"states":[0],"finals":[],"matrix":[[0.5]]}"#)
                .is_err()
        );
        assert!(PatternMarkovChain::from_json(
            r#"{"states":[0,1],"finals":[1],"matrix":[[0.5,0.5],[0.5,0.5]]}"#
        )
        .is_err());
        assert!(
            PatternMarkovChain::from_json(r#"{"states":[0],"finals":[],"matrix":[[1.0]]}"#).is_ok()
        );
    }

    fn random_probs(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = rng.gen_range(1..=200);
        let mut w: Vec<f64> = (0..h)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        w[rng.gen_range(0..h)] += 0.01;
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    #[test]
    fn random_intervals_are_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let probs = random_probs(&mut rng);
            let d = dist(probs.clone());
            let mut prev = 0;
            for theta in [0.3, 0.5, 0.7, 0.9] {
                let f = forecast_interval(&d, theta).unwrap();
                assert_eq!(Some((f.start, f.end)), brute_interval(&probs, theta));
                assert!(f.spread() >= prev);
                prev = f.spread();
            }
        }
    }

    proptest! {
        #[test]
        fn interval_is_minimal(weights in prop::collection::vec(0.0f64..1.0, 1..=200), theta in 0.01f64..=1.0) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 0.0);
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let d = dist(probs.clone());
            match forecast_interval(&d, theta) {
                Ok(f) => {
                    prop_assert_eq!(Some((f.start, f.end)), brute_interval(&probs, theta));
                    prop_assert!(f.probability >= theta - MASS_EPS);
                }
                Err(PmcError::HorizonTooShort { .. }) => prop_assert!(brute_interval(&probs, theta).is_none()),
                Err(e) => prop_assert!(false, "unexpected {}", e),
            }
        }

        #[test]
        fn interval_length_monotone_in_theta(weights in prop::collection::vec(0.0f64..1.0, 1..=100), t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 0.0);
            let d = dist(weights.iter().map(|w| w / total).collect());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            if let (Ok(a), Ok(b)) = (forecast_interval(&d, lo), forecast_interval(&d, hi)) {
                prop_assert!(a.spread() <= b.spread());
            }
        }
    }
}
