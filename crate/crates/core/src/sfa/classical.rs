use std::collections::HashMap;

use super::SymbolicDfa;

/// A plain DFA over named symbols, obtained by renaming each minterm of a
/// symbolic DFA to a distinct symbol `a1..ak`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalDfa {
    pub symbols: Vec<String>,
    pub initial: usize,
    pub finals: Vec<bool>,
    pub delta: Vec<HashMap<String, usize>>,
}

impl ClassicalDfa {
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> Option<bool> {
        let mut q = self.initial;
        for s in word {
            q = *self.delta[q].get(s.as_ref())?;
        }
        Some(self.finals[q])
    }
}

pub fn symbol_for(minterm: usize) -> String {
    format!("a{}", minterm + 1)
}

/// Relabels the automaton structure-preservingly: state ids, finals and
/// edges are copied; minterm `i` becomes symbol `a{i+1}`.
pub fn relabel_to_classical(dfa: &SymbolicDfa) -> ClassicalDfa {
    let k = dfa.num_minterms();
    ClassicalDfa {
        symbols: (0..k).map(symbol_for).collect(),
        initial: dfa.initial,
        finals: dfa.finals.clone(),
        delta: (0..dfa.num_states())
            .map(|q| (0..k).map(|m| (symbol_for(m), dfa.next(q, m))).collect())
            .collect(),
    }
}
