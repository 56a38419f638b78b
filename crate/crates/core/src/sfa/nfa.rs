use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::algebra::MintermSet;
use crate::pattern::PatternAst;

use super::SfaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    Epsilon,
    Minterm(usize),
}

/// A `(minterm, target)` move.
pub(crate) type Move = (usize, usize);

/// Nondeterministic automaton whose non-epsilon guards are minterm indices of
/// one shared [`MintermSet`].
#[derive(Debug, Clone)]
pub struct SymbolicNfa {
    pub alphabet: Arc<MintermSet>,
    pub num_states: usize,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    pub transitions: Vec<(usize, Guard, usize)>,
}

struct Builder {
    num_states: usize,
    transitions: Vec<(usize, Guard, usize)>,
}

impl Builder {
    fn state(&mut self) -> usize {
        self.num_states += 1;
        self.num_states - 1
    }

    fn edge(&mut self, from: usize, guard: Guard, to: usize) {
        self.transitions.push((from, guard, to));
    }

    /// Thompson fragment for `ast`; returns (entry, exit).
    fn fragment(
        &mut self,
        ast: &PatternAst,
        guards: &HashMap<String, Vec<usize>>,
    ) -> Result<(usize, usize), SfaError> {
        Ok(match ast {
            PatternAst::Leaf(var) => {
                let guard = guards
                    .get(var)
                    .ok_or_else(|| SfaError::MissingGuard(var.clone()))?;
                let (s, e) = (self.state(), self.state());
                for &m in guard {
                    self.edge(s, Guard::Minterm(m), e);
                }
                (s, e)
            }
            PatternAst::Concat(parts) => {
                let mut iter = parts.iter();
                let first = iter.next().ok_or(SfaError::EmptyExpression)?;
                let (s, mut e) = self.fragment(first, guards)?;
                for p in iter {
                    let (ps, pe) = self.fragment(p, guards)?;
                    self.edge(e, Guard::Epsilon, ps);
                    e = pe;
                }
                (s, e)
            }
            PatternAst::Union(alts) => {
                if alts.is_empty() {
                    return Err(SfaError::EmptyExpression);
                }
                let (s, e) = (self.state(), self.state());
                for a in alts {
                    let (as_, ae) = self.fragment(a, guards)?;
                    self.edge(s, Guard::Epsilon, as_);
                    self.edge(ae, Guard::Epsilon, e);
                }
                (s, e)
            }
            PatternAst::Star(inner) => {
                let (s, e) = (self.state(), self.state());
                let (is, ie) = self.fragment(inner, guards)?;
                self.edge(s, Guard::Epsilon, is);
                self.edge(s, Guard::Epsilon, e);
                self.edge(ie, Guard::Epsilon, is);
                self.edge(ie, Guard::Epsilon, e);
                (s, e)
            }
            PatternAst::Plus(inner) => {
                let desugared =
                    PatternAst::Concat(vec![(**inner).clone(), PatternAst::Star(inner.clone())]);
                self.fragment(&desugared, guards)?
            }
        })
    }
}

impl SymbolicNfa {
    /// Thompson construction of `ast`, where each leaf variable `v` reads
    /// any minterm in `guards[v]`. With `skip_prefix` the initial state
    /// carries a self-loop over every minterm, i.e. the automaton
    /// recognises `Σ*·R` and can start a match at any point of a stream.
    pub fn thompson(
        ast: &PatternAst,
        guards: &HashMap<String, Vec<usize>>,
        alphabet: Arc<MintermSet>,
        skip_prefix: bool,
    ) -> Result<Self, SfaError> {
        let mut b = Builder {
            num_states: 0,
            transitions: Vec::new(),
        };
        let initial = b.state();
        let (s, e) = b.fragment(&ast.desugar(), guards)?;
        b.edge(initial, Guard::Epsilon, s);
        if skip_prefix {
            for m in 0..alphabet.len() {
                b.edge(initial, Guard::Minterm(m), initial);
            }
        }
        Ok(SymbolicNfa {
            alphabet,
            num_states: b.num_states,
            initial,
            finals: BTreeSet::from([e]),
            transitions: b.transitions,
        })
    }

    pub fn epsilon_closure(&self, states: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut closure: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = states.into_iter().collect();
        while let Some(q) = stack.pop() {
            if closure.insert(q) {
                for &(from, g, to) in &self.transitions {
                    if from == q && g == Guard::Epsilon && !closure.contains(&to) {
                        stack.push(to);
                    }
                }
            }
        }
        closure
    }

    /// Adjacency by source: epsilon successors and (minterm, target) moves.
    pub(crate) fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<Move>>) {
        let mut eps = vec![Vec::new(); self.num_states];
        let mut moves = vec![Vec::new(); self.num_states];
        for &(from, g, to) in &self.transitions {
            match g {
                Guard::Epsilon => eps[from].push(to),
                Guard::Minterm(m) => moves[from].push((m, to)),
            }
        }
        (eps, moves)
    }

    /// Acceptance of a minterm word by direct subset simulation.
    pub fn accepts(&self, word: &[usize]) -> bool {
        let mut current = self.epsilon_closure([self.initial]);
        for &m in word {
            let next: Vec<usize> = self
                .transitions
                .iter()
                .filter(|(from, g, _)| *g == Guard::Minterm(m) && current.contains(from))
                .map(|&(_, _, to)| to)
                .collect();
            current = self.epsilon_closure(next);
        }
        current.iter().any(|q| self.finals.contains(q))
    }
}
