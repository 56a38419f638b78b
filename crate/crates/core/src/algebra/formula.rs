use std::fmt;
use std::sync::Arc;

use super::{AlgebraError, Event, Value};

/// A constant argument passed to a predicate after its event variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Const {
    Num(f64),
    Pair(f64, f64),
    Ident(String),
    Str(String),
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Num(v) => write!(f, "{v:?}"),
            Const::Pair(a, b) => write!(f, "({a:?}, {b:?})"),
            Const::Ident(s) => f.write_str(s),
            Const::Str(s) => write!(f, "\"{}\"", s.replace('"', "\\\"")),
        }
    }
}

/// Half-open interval `[lo, hi)` over some scalar quantity of an event.
///
/// Two atoms exposing bands with the same `quantity` key measure the same
/// thing, so their intervals may be intersected by the satisfiability oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub quantity: String,
    pub lo: f64,
    pub hi: f64,
}

/// Evaluation kernel behind a predicate atom.
pub trait AtomKernel: Send + Sync + fmt::Debug {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError>;

    /// The band this atom tests, if it is a single-quantity comparison.
    fn band(&self) -> Option<Band> {
        None
    }

    /// Attributes the kernel reads.
    fn attributes(&self) -> Vec<String> {
        Vec::new()
    }

    /// Attribute values worth trying when searching for events on either
    /// side of the atom.
    fn witnesses(&self) -> Vec<(String, Value)> {
        Vec::new()
    }
}

/// A unary predicate applied to the event bound to `var`.
///
/// Identity (equality, hashing, duplicate detection) is by name and constant
/// arguments only; the variable is a binding detail of the pattern.
#[derive(Debug, Clone)]
pub struct PredicateAtom {
    pub name: String,
    pub var: String,
    pub args: Vec<Const>,
    kernel: Arc<dyn AtomKernel>,
}

impl PredicateAtom {
    pub fn new(
        name: impl Into<String>,
        var: impl Into<String>,
        args: Vec<Const>,
        kernel: Arc<dyn AtomKernel>,
    ) -> Self {
        PredicateAtom {
            name: name.into(),
            var: var.into(),
            args,
            kernel,
        }
    }

    pub fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        self.kernel.eval(event)
    }

    pub fn band(&self) -> Option<Band> {
        self.kernel.band()
    }

    pub fn attributes(&self) -> Vec<String> {
        self.kernel.attributes()
    }

    pub fn witnesses(&self) -> Vec<(String, Value)> {
        self.kernel.witnesses()
    }

    /// `Name(arg, ...)` without the event variable.
    pub fn key(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        format!("{}({})", self.name, args.join(", "))
    }

    /// The same atom bound to a different event variable.
    pub fn rebind(&self, var: &str) -> PredicateAtom {
        PredicateAtom {
            var: var.to_string(),
            ..self.clone()
        }
    }

    pub fn same_as(&self, other: &PredicateAtom) -> bool {
        self.name == other.name && self.args == other.args
    }
}

impl PartialEq for PredicateAtom {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Display for PredicateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.name, self.var)?;
        for arg in &self.args {
            write!(f, ", {arg}")?;
        }
        f.write_str(")")
    }
}

/// Boolean formula over predicate atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum PredicateFormula {
    Atom(PredicateAtom),
    Not(Box<PredicateFormula>),
    And(Vec<PredicateFormula>),
    Or(Vec<PredicateFormula>),
}

impl PredicateFormula {
    pub fn atom(atom: PredicateAtom) -> Self {
        PredicateFormula::Atom(atom)
    }

    pub fn negate(inner: PredicateFormula) -> Self {
        PredicateFormula::Not(Box::new(inner))
    }

    pub fn evaluate(&self, event: &Event) -> Result<bool, AlgebraError> {
        self.eval_with(&mut |atom| atom.eval(event))
    }

    /// Evaluates with atom truth supplied by `truth`. Every atom is visited
    /// (no short-circuit) so that errors surface for incomplete events.
    pub fn eval_with<E>(
        &self,
        truth: &mut impl FnMut(&PredicateAtom) -> Result<bool, E>,
    ) -> Result<bool, E> {
        match self {
            PredicateFormula::Atom(a) => truth(a),
            PredicateFormula::Not(inner) => Ok(!inner.eval_with(truth)?),
            PredicateFormula::And(children) => {
                let mut acc = true;
                for c in children {
                    acc &= c.eval_with(truth)?;
                }
                Ok(acc)
            }
            PredicateFormula::Or(children) => {
                let mut acc = false;
                for c in children {
                    acc |= c.eval_with(truth)?;
                }
                Ok(acc)
            }
        }
    }

    /// All atoms in first-appearance order, duplicates included.
    pub fn atoms(&self) -> Vec<&PredicateAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a PredicateAtom>) {
        match self {
            PredicateFormula::Atom(a) => out.push(a),
            PredicateFormula::Not(inner) => inner.collect_atoms(out),
            PredicateFormula::And(cs) | PredicateFormula::Or(cs) => {
                for c in cs {
                    c.collect_atoms(out);
                }
            }
        }
    }

    /// Variables referenced by the formula's atoms, deduplicated.
    pub fn vars(&self) -> Vec<&str> {
        let mut vars: Vec<&str> = Vec::new();
        for a in self.atoms() {
            if !vars.contains(&a.var.as_str()) {
                vars.push(&a.var);
            }
        }
        vars
    }
}

impl fmt::Display for PredicateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateFormula::Atom(a) => write!(f, "{a}"),
            PredicateFormula::Not(inner) => match **inner {
                PredicateFormula::Atom(_) | PredicateFormula::Not(_) => write!(f, "NOT {inner}"),
                _ => write!(f, "NOT ({inner})"),
            },
            PredicateFormula::And(cs) => join(f, cs, " AND "),
            PredicateFormula::Or(cs) => join(f, cs, " OR "),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, cs: &[PredicateFormula], sep: &str) -> fmt::Result {
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        match c {
            PredicateFormula::And(_) | PredicateFormula::Or(_) => write!(f, "({c})")?,
            _ => write!(f, "{c}")?,
        }
    }
    Ok(())
}
