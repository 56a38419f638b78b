//! Complex event forecasting.
//!
//! Patterns are regular expressions whose letters are Boolean predicates over
//! events. A pattern compiles to a deterministic symbolic automaton over the
//! minterms of its predicates; the automaton's run over a stream is modelled
//! as a Markov chain whose transition matrix is learned from data. From that
//! chain every automaton state gets a waiting-time distribution and the
//! shortest interval of future steps in which the pattern completes with at
//! least a requested probability.

pub mod algebra;
pub mod engine;
pub mod geo;
pub mod pattern;
pub mod pmc;
pub mod sfa;

pub use algebra::{Event, Value};
