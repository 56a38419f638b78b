use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AlgebraError, Band, Event, PredicateAtom, PredicateFormula};

/// Largest predicate set for which a minterm lookup table is built.
pub const MAX_PREDICATES: usize = 20;

/// Strategy used to discard unsatisfiable sign combinations.
///
/// Both strategies are sound: they never drop a satisfiable combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SatOracle {
    #[default]
    AssumeAllSatisfiable,
    /// Prunes combinations whose band atoms over a shared quantity cannot be
    /// satisfied together.
    IntervalPruning,
}

impl SatOracle {
    /// `false` only when the combination is provably unsatisfiable.
    pub fn maybe_satisfiable(&self, predicates: &[PredicateAtom], signs: u64) -> bool {
        match self {
            SatOracle::AssumeAllSatisfiable => true,
            SatOracle::IntervalPruning => bands_satisfiable(predicates, signs),
        }
    }
}

fn bands_satisfiable(predicates: &[PredicateAtom], signs: u64) -> bool {
    let mut by_quantity: BTreeMap<String, (Vec<Band>, Vec<Band>)> = BTreeMap::new();
    for (i, p) in predicates.iter().enumerate() {
        if let Some(band) = p.band() {
            let entry = by_quantity.entry(band.quantity.clone()).or_default();
            if signs >> i & 1 == 1 {
                entry.0.push(band);
            } else {
                entry.1.push(band);
            }
        }
    }
    for (positives, mut negatives) in by_quantity.into_values() {
        if positives.is_empty() {
            continue;
        }
        let lo = positives
            .iter()
            .map(|b| b.lo)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = positives.iter().map(|b| b.hi).fold(f64::INFINITY, f64::min);
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return false;
        }
        // [lo, hi) fully covered by the union of negated bands?
        negatives.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut reach = lo;
        for n in &negatives {
            if n.lo <= reach && n.hi > reach {
                reach = n.hi;
            }
        }
        if reach >= hi {
            return false;
        }
    }
    true
}

/// A maximal conjunction of (possibly negated) atoms from a fixed predicate
/// set. Bit `i` of `signs` set means predicate `i` appears positively.
#[derive(Debug, Clone)]
pub struct Minterm {
    pub predicates: Arc<[PredicateAtom]>,
    pub signs: u64,
}

impl Minterm {
    pub fn is_positive(&self, i: usize) -> bool {
        self.signs >> i & 1 == 1
    }

    pub fn evaluate(&self, event: &Event) -> Result<bool, AlgebraError> {
        let mut all = true;
        for (i, p) in self.predicates.iter().enumerate() {
            all &= p.eval(event)? == self.is_positive(i);
        }
        Ok(all)
    }

    /// The minterm as a formula; the empty conjunction is `And([])`, i.e. ⊤.
    pub fn to_formula(&self) -> PredicateFormula {
        PredicateFormula::And(
            self.predicates
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let leaf = PredicateFormula::Atom(p.clone());
                    if self.is_positive(i) {
                        leaf
                    } else {
                        PredicateFormula::negate(leaf)
                    }
                })
                .collect(),
        )
    }

    /// Truth of `formula` for every event falling in this minterm. Atoms of
    /// the formula must belong to the predicate set.
    pub fn implies(&self, formula: &PredicateFormula) -> Result<bool, AlgebraError> {
        formula.eval_with(&mut |atom| {
            self.predicates
                .iter()
                .position(|p| p.same_as(atom))
                .map(|i| self.is_positive(i))
                .ok_or_else(|| AlgebraError::UnknownAtom(atom.key()))
        })
    }
}

impl PartialEq for Minterm {
    fn eq(&self, other: &Self) -> bool {
        self.signs == other.signs && self.predicates[..] == other.predicates[..]
    }
}

impl fmt::Display for Minterm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicates.is_empty() {
            return f.write_str("TRUE");
        }
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            if !self.is_positive(i) {
                f.write_str("¬")?;
            }
            f.write_str(&p.key())?;
        }
        Ok(())
    }
}

/// All sign assignments over `predicates` that `oracle` cannot rule out, in
/// binary-counter order of the sign mask.
pub fn compute_minterms(predicates: &[PredicateAtom], oracle: SatOracle) -> Vec<Minterm> {
    assert!(predicates.len() < 64, "too many predicates for a sign mask");
    let shared: Arc<[PredicateAtom]> = predicates.to_vec().into();
    (0..1u64 << predicates.len())
        .filter(|&signs| oracle.maybe_satisfiable(predicates, signs))
        .map(|signs| Minterm {
            predicates: shared.clone(),
            signs,
        })
        .collect()
}

/// Minterms over one predicate set together with an index for classifying
/// events in one pass over the atoms.
#[derive(Debug, Clone)]
pub struct MintermSet {
    predicates: Arc<[PredicateAtom]>,
    minterms: Vec<Minterm>,
    lookup: Vec<Option<u32>>,
}

impl MintermSet {
    pub fn new(predicates: Vec<PredicateAtom>, oracle: SatOracle) -> Result<Self, AlgebraError> {
        if predicates.len() > MAX_PREDICATES {
            return Err(AlgebraError::TooManyPredicates(predicates.len()));
        }
        for (i, p) in predicates.iter().enumerate() {
            if predicates[..i].iter().any(|q| q.same_as(p)) {
                return Err(AlgebraError::DuplicatePredicate(p.key()));
            }
        }
        let minterms = compute_minterms(&predicates, oracle);
        let predicates = minterms
            .first()
            .map(|m| m.predicates.clone())
            .unwrap_or_else(|| predicates.into());
        let mut lookup = vec![None; 1 << predicates.len()];
        for (idx, m) in minterms.iter().enumerate() {
            lookup[m.signs as usize] = Some(idx as u32);
        }
        Ok(MintermSet {
            predicates,
            minterms,
            lookup,
        })
    }

    pub fn predicates(&self) -> &[PredicateAtom] {
        &self.predicates
    }

    pub fn minterms(&self) -> &[Minterm] {
        &self.minterms
    }

    pub fn len(&self) -> usize {
        self.minterms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minterms.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Minterm {
        &self.minterms[idx]
    }

    /// Sign mask of `event` over the predicate set.
    pub fn signs_of(&self, event: &Event) -> Result<u64, AlgebraError> {
        let mut signs = 0u64;
        for (i, p) in self.predicates.iter().enumerate() {
            if p.eval(event)? {
                signs |= 1 << i;
            }
        }
        Ok(signs)
    }

    /// Index of the unique minterm satisfied by `event`.
    pub fn classify_index(&self, event: &Event) -> Result<usize, AlgebraError> {
        let signs = self.signs_of(event)?;
        self.lookup[signs as usize]
            .map(|i| i as usize)
            .ok_or(AlgebraError::NoMatchingMinterm { signs })
    }

    pub fn classify(&self, event: &Event) -> Result<&Minterm, AlgebraError> {
        self.classify_index(event).map(|i| &self.minterms[i])
    }

    /// Index of the minterm with the given sign mask, if it was kept.
    pub fn index_of_signs(&self, signs: u64) -> Option<usize> {
        self.lookup
            .get(signs as usize)
            .copied()
            .flatten()
            .map(|i| i as usize)
    }

    /// Indices of minterms on which `formula` holds.
    pub fn guard(&self, formula: &PredicateFormula) -> Result<Vec<usize>, AlgebraError> {
        let mut out = Vec::new();
        for (i, m) in self.minterms.iter().enumerate() {
            if m.implies(formula)? {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`MintermSet::classify`] over a plain minterm list.
pub fn classify<'a>(event: &Event, minterms: &'a [Minterm]) -> Result<&'a Minterm, AlgebraError> {
    let mut hit = None;
    for m in minterms {
        if m.evaluate(event)? {
            if hit.is_some() {
                return Err(AlgebraError::AmbiguousMinterms);
            }
            hit = Some(m);
        }
    }
    match hit {
        Some(m) => Ok(m),
        None => {
            let signs = match minterms.first() {
                Some(m) => {
                    let mut s = 0;
                    for (i, p) in m.predicates.iter().enumerate() {
                        if p.eval(event)? {
                            s |= 1 << i;
                        }
                    }
                    s
                }
                None => 0,
            };
            Err(AlgebraError::NoMatchingMinterm { signs })
        }
    }
}
