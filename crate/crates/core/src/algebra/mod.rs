//! Events, predicate formulas and the minterm alphabet built from them.

pub mod atoms;
mod event;
mod formula;
mod minterm;

pub use event::{Event, Value};
pub use formula::{AtomKernel, Band, Const, PredicateAtom, PredicateFormula};
pub use minterm::{classify, compute_minterms, Minterm, MintermSet, SatOracle, MAX_PREDICATES};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("event is missing attribute `{0}`")]
    MissingAttribute(String),
    #[error("attribute `{0}` is not numeric")]
    NotNumeric(String),
    #[error("no minterm matches sign mask {signs:#b}; the satisfiability oracle pruned a satisfiable combination")]
    NoMatchingMinterm { signs: u64 },
    #[error("more than one minterm matched the event")]
    AmbiguousMinterms,
    #[error("atom `{0}` is not part of the minterm predicate set")]
    UnknownAtom(String),
    #[error("duplicate predicate `{0}`")]
    DuplicatePredicate(String),
    #[error("{0} predicates exceed the supported maximum of {MAX_PREDICATES}")]
    TooManyPredicates(usize),
}
