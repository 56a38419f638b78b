use std::collections::{HashMap, VecDeque};

use super::{SfaError, SymbolicDfa};

pub const DEFAULT_STATE_CAP: usize = 50_000;

/// A DFA in which every state determines the last `order` minterms read to
/// reach it.
///
/// `history[q]` holds the last `min(order, depth)` minterms; states whose
/// history is shorter than `order` are only reachable during the first
/// `order - 1` events of a run.
#[derive(Debug, Clone)]
pub struct DisambiguatedDfa {
    pub dfa: SymbolicDfa,
    pub order: usize,
    pub history: Vec<Vec<usize>>,
    /// State of the input automaton each state was cloned from.
    pub origin: Vec<usize>,
}

impl DisambiguatedDfa {
    /// The wrapped DFA without any splitting (order 0).
    pub fn identity(dfa: SymbolicDfa) -> Self {
        let n = dfa.num_states();
        DisambiguatedDfa {
            dfa,
            order: 0,
            history: vec![Vec::new(); n],
            origin: (0..n).collect(),
        }
    }

    /// The unique length-`order` word leading to `state`, if the state is
    /// deep enough to have one. Empty for order 0.
    pub fn annotation(&self, state: usize) -> Option<&[usize]> {
        if self.order == 0 {
            return None;
        }
        let h = &self.history[state];
        (h.len() == self.order).then_some(h.as_slice())
    }

    pub fn num_states(&self) -> usize {
        self.dfa.num_states()
    }
}

/// Splits states until each remembers its last `order` minterms.
///
/// Breadth-first from the initial state, every state is paired with the
/// window of minterms that led to it; a pair is only created when reached,
/// so a state of the input is cloned exactly once per distinct window that
/// can end at it. Fails once the result would exceed `state_cap` states.
pub fn disambiguate(
    dfa: &SymbolicDfa,
    order: usize,
    state_cap: usize,
) -> Result<DisambiguatedDfa, SfaError> {
    if order == 0 {
        return Ok(DisambiguatedDfa::identity(dfa.clone()));
    }
    let k = dfa.num_minterms();
    let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
    let mut keys: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut queue = VecDeque::new();
    let start = (dfa.initial, Vec::new());
    ids.insert(start.clone(), 0);
    keys.push(start);
    queue.push_back(0usize);
    let mut table: Vec<Vec<usize>> = Vec::new();

    while let Some(id) = queue.pop_front() {
        let (q, window) = keys[id].clone();
        let mut row = Vec::with_capacity(k);
        for m in 0..k {
            let mut next_window = window.clone();
            next_window.push(m);
            if next_window.len() > order {
                next_window.remove(0);
            }
            let key = (dfa.next(q, m), next_window);
            let next_id = match ids.get(&key) {
                Some(&i) => i,
                None => {
                    let i = keys.len();
                    if i >= state_cap {
                        return Err(SfaError::StateCapExceeded {
                            cap: state_cap,
                            order,
                        });
                    }
                    ids.insert(key.clone(), i);
                    keys.push(key);
                    queue.push_back(i);
                    i
                }
            };
            row.push(next_id);
        }
        table.push(row);
    }

    if keys.len() > state_cap * 4 / 5 {
        log::warn!(
            "disambiguation to order {order} produced {} states (cap {state_cap})",
            keys.len()
        );
    }
    let finals = keys.iter().map(|(q, _)| dfa.finals[*q]).collect();
    let origin = keys.iter().map(|(q, _)| *q).collect();
    let history = keys.into_iter().map(|(_, w)| w).collect();
    Ok(DisambiguatedDfa {
        dfa: SymbolicDfa::from_table(dfa.alphabet.clone(), 0, finals, table),
        order,
        history,
        origin,
    })
}
