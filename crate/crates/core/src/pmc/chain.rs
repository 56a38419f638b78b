use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::Event;
use crate::sfa::DisambiguatedDfa;

use super::PmcError;

/// Tolerance on row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Markov chain over the states of a disambiguated automaton.
///
/// Row `i` is automaton state `i`. Rows are stored sparsely as sorted
/// `(column, probability)` pairs; only structurally possible transitions
/// appear. Final rows are absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMarkovChain {
    rows: Vec<Vec<(usize, f64)>>,
    finals: Vec<bool>,
    counts: Vec<Vec<(usize, u64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnOptions {
    /// Replay each partition separately, starting from the initial state.
    pub per_partition: bool,
    /// Restart the run at the initial state right after a detection.
    pub reset_on_detection: bool,
    /// Add-one smoothing over structural successors.
    pub laplace: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            per_partition: true,
            reset_on_detection: true,
            laplace: false,
        }
    }
}

/// A learned chain plus diagnostics from the replay.
#[derive(Debug, Clone)]
pub struct Learned {
    pub pmc: PatternMarkovChain,
    /// Non-final states never departed from in training; their rows fall
    /// back to uniform over structural successors.
    pub unvisited: Vec<usize>,
}

/// Distinct successors of `q`, ascending.
fn successors(dfa: &DisambiguatedDfa, q: usize) -> Vec<usize> {
    let mut s = dfa.dfa.row(q).to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

impl PatternMarkovChain {
    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.finals[state]
    }

    pub fn finals(&self) -> &[bool] {
        &self.finals
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn counts(&self, state: usize) -> &[(usize, u64)] {
        &self.counts[state]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_states();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(j, p) in row {
                    dense[j] = p;
                }
                dense
            })
            .collect()
    }

    /// Counts transitions along minterm words (one word per partition) and
    /// turns them into maximum-likelihood estimates `n_ij / n_i`.
    pub fn learn_from_words<W: AsRef<[usize]>>(
        dfa: &DisambiguatedDfa,
        words: &[W],
        options: LearnOptions,
    ) -> Result<Learned, PmcError> {
        if words.iter().all(|w| w.as_ref().is_empty()) {
            return Err(PmcError::EmptyTraining);
        }
        let inner = &dfa.dfa;
        let n = inner.num_states();
        let mut tallies: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); n];
        for word in words {
            let mut q = inner.initial;
            for &m in word.as_ref() {
                let next = inner.next(q, m);
                *tallies[q].entry(next).or_insert(0) += 1;
                q = if options.reset_on_detection && inner.is_final(next) {
                    inner.initial
                } else {
                    next
                };
            }
        }
        let counts: Vec<Vec<(usize, u64)>> = tallies
            .into_iter()
            .map(|t| t.into_iter().collect())
            .collect();
        let (pmc, unvisited) = Self::from_counts(dfa, counts, options.laplace);
        if !unvisited.is_empty() {
            log::warn!(
                "{} non-final state(s) unvisited in training: {:?}",
                unvisited.len(),
                unvisited
            );
        }
        Ok(Learned { pmc, unvisited })
    }

    /// Classifies `stream`, splits it by partition when requested, and learns
    /// from the resulting minterm words.
    pub fn learn(
        dfa: &DisambiguatedDfa,
        stream: &[Event],
        partition_attribute: &str,
        options: LearnOptions,
    ) -> Result<Learned, PmcError> {
        if stream.is_empty() {
            return Err(PmcError::EmptyTraining);
        }
        let alphabet = &dfa.dfa.alphabet;
        let mut order: Vec<Arc<str>> = Vec::new();
        let mut words: BTreeMap<Arc<str>, Vec<usize>> = BTreeMap::new();
        for e in stream {
            let key: Arc<str> = if options.per_partition {
                e.partition_value(partition_attribute)
            } else {
                Arc::from("")
            };
            let m = alphabet.classify_index(e)?;
            words
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(m);
        }
        let ordered: Vec<Vec<usize>> = order.iter().map(|k| words.remove(k).unwrap()).collect();
        Self::learn_from_words(dfa, &ordered, options)
    }

    fn from_counts(
        dfa: &DisambiguatedDfa,
        counts: Vec<Vec<(usize, u64)>>,
        laplace: bool,
    ) -> (Self, Vec<usize>) {
        let inner = &dfa.dfa;
        let n = inner.num_states();
        let mut rows = Vec::with_capacity(n);
        let mut unvisited = Vec::new();
        for (q, seen) in counts.iter().enumerate() {
            if inner.is_final(q) {
                rows.push(vec![(q, 1.0)]);
                continue;
            }
            let succ = successors(dfa, q);
            let observed: u64 = seen.iter().map(|&(_, c)| c).sum();
            if observed == 0 {
                unvisited.push(q);
            }
            let row: Vec<(usize, f64)> = if observed == 0 {
                let p = 1.0 / succ.len() as f64;
                succ.iter().map(|&j| (j, p)).collect()
            } else if laplace {
                let total = (observed + succ.len() as u64) as f64;
                succ.iter()
                    .map(|&j| {
                        let c = seen.iter().find(|&&(t, _)| t == j).map_or(0, |&(_, c)| c);
                        (j, (c + 1) as f64 / total)
                    })
                    .collect()
            } else {
                seen.iter()
                    .map(|&(j, c)| (j, c as f64 / observed as f64))
                    .collect()
            };
            rows.push(row);
        }
        let pmc = PatternMarkovChain {
            rows,
            finals: inner.finals.clone(),
            counts,
        };
        (pmc, unvisited)
    }

    /// The chain induced by a known source: from state `p`, minterm `a`
    /// has probability `source(history of p)[a]` and moves to `δ(p, a)`.
    /// The history passed is the state's window of past minterms (shorter
    /// than the order near the start of a run).
    pub fn analytic(dfa: &DisambiguatedDfa, source: impl Fn(&[usize]) -> Vec<f64>) -> Self {
        let inner = &dfa.dfa;
        let n = inner.num_states();
        let k = inner.num_minterms();
        let mut rows = Vec::with_capacity(n);
        for q in 0..n {
            if inner.is_final(q) {
                rows.push(vec![(q, 1.0)]);
                continue;
            }
            let probs = source(&dfa.history[q]);
            assert_eq!(
                probs.len(),
                k,
                "source must give one probability per minterm"
            );
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (m, p) in probs.into_iter().enumerate() {
                if p > 0.0 {
                    *acc.entry(inner.next(q, m)).or_insert(0.0) += p;
                }
            }
            rows.push(acc.into_iter().collect());
        }
        PatternMarkovChain {
            rows,
            finals: inner.finals.clone(),
            counts: vec![Vec::new(); n],
        }
    }

    /// Checks stochasticity, entry range and absorbing finals.
    pub fn validate(&self) -> Result<(), PmcError> {
        let n = self.num_states();
        for (i, row) in self.rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(j, p) in row {
                if j >= n || !(0.0..=1.0).contains(&p) {
                    return Err(PmcError::NotStochastic { row: i });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(PmcError::NotStochastic { row: i });
            }
            if self.finals[i] && self.get(i, i) != 1.0 {
                return Err(PmcError::NotAbsorbing { row: i });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let n = self.num_states();
        let doc = PmcDocument {
            states: (0..n).collect(),
            finals: (0..n).filter(|&q| self.finals[q]).collect(),
            matrix: self.to_dense(),
            counts: self
                .counts
                .iter()
                .map(|row| {
                    let mut dense = vec![0u64; n];
                    for &(j, c) in row {
                        dense[j] = c;
                    }
                    dense
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PmcError> {
        let doc: PmcDocument = serde_json::from_str(text)?;
        let n = doc.states.len();
        if doc.matrix.len() != n || doc.matrix.iter().any(|r| r.len() != n) {
            return Err(PmcError::Malformed(
                "matrix must be square over the state index".into(),
            ));
        }
        if doc.states.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(PmcError::Malformed(
                "state index must map row i to state i".into(),
            ));
        }
        let mut finals = vec![false; n];
        for &f in &doc.finals {
            *finals
                .get_mut(f)
                .ok_or_else(|| PmcError::Malformed(format!("final state {f} out of range")))? =
                true;
        }
        let rows = doc
            .matrix
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect();
        let counts = if doc.counts.is_empty() {
            vec![Vec::new(); n]
        } else {
            if doc.counts.len() != n {
                return Err(PmcError::Malformed(
                    "counts must have one row per state".into(),
                ));
            }
            doc.counts
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0)
                        .map(|(j, &c)| (j, c))
                        .collect()
                })
                .collect()
        };
        let pmc = PatternMarkovChain {
            rows,
            finals,
            counts,
        };
        pmc.validate()?;
        Ok(pmc)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PmcDocument {
    states: Vec<usize>,
    finals: Vec<usize>,
    matrix: Vec<Vec<f64>>,
    #[serde(default)]
    counts: Vec<Vec<u64>>,
}
