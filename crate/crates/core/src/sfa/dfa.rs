use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::algebra::{AlgebraError, Event, MintermSet};

use super::SymbolicNfa;

/// Deterministic symbolic automaton with a total transition function over
/// minterm indices, stored row-major as `delta[state * k + minterm]`.
#[derive(Debug, Clone)]
pub struct SymbolicDfa {
    pub alphabet: Arc<MintermSet>,
    pub initial: usize,
    pub finals: Vec<bool>,
    delta: Vec<usize>,
}

impl SymbolicDfa {
    /// Builds a DFA from a full transition table; panics if it is not total.
    pub fn from_table(
        alphabet: Arc<MintermSet>,
        initial: usize,
        finals: Vec<bool>,
        table: Vec<Vec<usize>>,
    ) -> Self {
        let k = alphabet.len();
        let n = finals.len();
        assert_eq!(table.len(), n, "one row per state");
        let mut delta = Vec::with_capacity(n * k);
        for row in table {
            assert_eq!(row.len(), k, "row must cover every minterm");
            assert!(row.iter().all(|&t| t < n), "target out of range");
            delta.extend(row);
        }
        assert!(initial < n);
        SymbolicDfa {
            alphabet,
            initial,
            finals,
            delta,
        }
    }

    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn num_minterms(&self) -> usize {
        self.alphabet.len()
    }

    #[inline]
    pub fn next(&self, state: usize, minterm: usize) -> usize {
        self.delta[state * self.alphabet.len() + minterm]
    }

    pub fn row(&self, state: usize) -> &[usize] {
        let k = self.alphabet.len();
        &self.delta[state * k..(state + 1) * k]
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.finals[state]
    }

    /// Classifies `event` and follows the transition; reports whether the
    /// target is final.
    pub fn step(&self, state: usize, event: &Event) -> Result<(usize, bool), AlgebraError> {
        let m = self.alphabet.classify_index(event)?;
        let next = self.next(state, m);
        Ok((next, self.finals[next]))
    }

    /// State reached from the initial state on `word`.
    pub fn run(&self, word: &[usize]) -> usize {
        word.iter().fold(self.initial, |q, &m| self.next(q, m))
    }

    pub fn accepts(&self, word: &[usize]) -> bool {
        self.finals[self.run(word)]
    }

    /// States with no path to a final state.
    pub fn dead_states(&self) -> Vec<usize> {
        let n = self.num_states();
        let mut live: Vec<bool> = self.finals.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for q in 0..n {
                if !live[q] && self.row(q).iter().any(|&t| live[t]) {
                    live[q] = true;
                    changed = true;
                }
            }
        }
        (0..n).filter(|&q| !live[q]).collect()
    }
}

/// Subset construction over minterms. Only reachable subsets are kept and
/// numbered in breadth-first order from the initial closure; an empty subset
/// becomes an absorbing non-final dead state when reached.
pub fn determinize(nfa: &SymbolicNfa) -> SymbolicDfa {
    let k = nfa.alphabet.len();
    let (eps, moves) = nfa.adjacency();
    let closure = |seed: &mut Vec<usize>| -> Vec<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        while let Some(q) = seed.pop() {
            if seen.insert(q) {
                seed.extend(eps[q].iter().copied().filter(|t| !seen.contains(t)));
            }
        }
        seen.into_iter().collect()
    };

    let start = closure(&mut vec![nfa.initial]);
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(start.clone(), 0);
    subsets.push(start);
    queue.push_back(0usize);
    let mut table: Vec<Vec<usize>> = Vec::new();

    while let Some(id) = queue.pop_front() {
        let subset = subsets[id].clone();
        let mut targets: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &q in &subset {
            for &(m, to) in &moves[q] {
                targets[m].push(to);
            }
        }
        let mut row = Vec::with_capacity(k);
        for mut seed in targets {
            let next = closure(&mut seed);
            let next_id = match ids.get(&next) {
                Some(&i) => i,
                None => {
                    let i = subsets.len();
                    ids.insert(next.clone(), i);
                    subsets.push(next);
                    queue.push_back(i);
                    i
                }
            };
            row.push(next_id);
        }
        if table.len() <= id {
            table.resize(id + 1, Vec::new());
        }
        table[id] = row;
    }

    let finals = subsets
        .iter()
        .map(|s| s.iter().any(|q| nfa.finals.contains(q)))
        .collect();
    SymbolicDfa::from_table(nfa.alphabet.clone(), 0, finals, table)
}
