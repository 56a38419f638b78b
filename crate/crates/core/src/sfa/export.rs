use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DisambiguatedDfa;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub id: usize,
    #[serde(rename = "final")]
    pub is_final: bool,
    pub origin: usize,
    pub history: Vec<usize>,
    /// Target state per minterm index.
    pub next: Vec<usize>,
}

/// Serializable view of a compiled automaton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonDump {
    pub order: usize,
    pub minterms: Vec<String>,
    pub initial: usize,
    pub states: Vec<StateDump>,
}

impl AutomatonDump {
    pub fn new(dfa: &DisambiguatedDfa) -> Self {
        let inner = &dfa.dfa;
        AutomatonDump {
            order: dfa.order,
            minterms: inner
                .alphabet
                .minterms()
                .iter()
                .map(|m| m.to_string())
                .collect(),
            initial: inner.initial,
            states: (0..inner.num_states())
                .map(|q| StateDump {
                    id: q,
                    is_final: inner.is_final(q),
                    origin: dfa.origin[q],
                    history: dfa.history[q].clone(),
                    next: inner.row(q).to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("automaton dump serializes")
    }

    /// Human-readable transition table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "order {}  states {}  initial {}",
            self.order,
            self.states.len(),
            self.initial
        );
        for (i, m) in self.minterms.iter().enumerate() {
            let _ = writeln!(out, "  m{i}: {m}");
        }
        for s in &self.states {
            let mark = if s.is_final { "*" } else { " " };
            let next: Vec<String> = s.next.iter().map(|t| t.to_string()).collect();
            let _ = writeln!(
                out,
                "{mark}{:>5} <- {:?} : [{}]",
                s.id,
                s.history,
                next.join(" ")
            );
        }
        out
    }
}
