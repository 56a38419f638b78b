//! Pattern language: a regular expression over event variables, a `WHERE`
//! clause binding each variable to a predicate formula, a partition
//! attribute, and an optional `[config]` section.

mod ast;
mod parser;
mod registry;

use std::fmt;

use thiserror::Error;

use crate::algebra::{PredicateAtom, PredicateFormula};

pub use ast::PatternAst;
pub use registry::{expect_arity, ident_arg, num_arg, PredicateRegistry};

pub const DEFAULT_PARTITION: &str = "partitionKey";
pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("variable `{0}` has no binding in the WHERE clause")]
    UnboundVariable(String),
    #[error("binding for `{0}` does not appear in the regular part")]
    UnusedBinding(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("bad arguments to `{predicate}` at {line}:{col}: {message}")]
    BadArguments {
        predicate: String,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("conjunct `{0}` must reference exactly one event variable")]
    MixedVariables(String),
    #[error("extra feature `{0}` duplicates a pattern predicate or another extra")]
    DuplicateExtra(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A parsed and bound pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub ast: PatternAst,
    /// Variable bindings in order of first appearance.
    pub bindings: Vec<(String, PredicateFormula)>,
    pub partition_attribute: String,
    pub extras: Vec<PredicateAtom>,
    pub order: usize,
    pub theta: f64,
    pub horizon: Option<usize>,
}

impl PatternSpec {
    pub fn new(ast: PatternAst) -> Self {
        PatternSpec {
            ast,
            bindings: Vec::new(),
            partition_attribute: DEFAULT_PARTITION.to_string(),
            extras: Vec::new(),
            order: 0,
            theta: DEFAULT_THETA,
            horizon: None,
        }
    }

    pub fn binding(&self, var: &str) -> Option<&PredicateFormula> {
        self.bindings.iter().find(|(v, _)| v == var).map(|(_, f)| f)
    }

    /// Distinct atoms of all bindings (first-appearance order) followed by
    /// the extra features: the predicate set of the automaton alphabet.
    pub fn predicates(&self) -> Vec<PredicateAtom> {
        let mut out = self.pattern_predicates();
        out.extend(self.extras.iter().cloned());
        out
    }

    pub fn pattern_predicates(&self) -> Vec<PredicateAtom> {
        let mut out: Vec<PredicateAtom> = Vec::new();
        for (_, f) in &self.bindings {
            for a in f.atoms() {
                if !out.iter().any(|b| b.same_as(a)) {
                    out.push(a.clone());
                }
            }
        }
        out
    }

    /// Replaces the extra features, checking disjointness.
    pub fn with_extras(mut self, extras: Vec<PredicateAtom>) -> Result<Self, PatternError> {
        self.extras = extras;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let vars = self.ast.vars();
        for v in &vars {
            if self.binding(v).is_none() {
                return Err(PatternError::UnboundVariable(v.clone()));
            }
        }
        for (v, _) in &self.bindings {
            if !vars.contains(v) {
                return Err(PatternError::UnusedBinding(v.clone()));
            }
        }
        let pattern_atoms = self.pattern_predicates();
        for (i, e) in self.extras.iter().enumerate() {
            if pattern_atoms.iter().any(|a| a.same_as(e))
                || self.extras[..i].iter().any(|a| a.same_as(e))
            {
                return Err(PatternError::DuplicateExtra(e.key()));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(PatternError::InvalidConfig(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.ast)?;
        if !self.bindings.is_empty() {
            f.write_str("WHERE ")?;
            for (i, (var, formula)) in self.bindings.iter().enumerate() {
                if i > 0 {
                    f.write_str("\n  AND ")?;
                }
                match formula {
                    PredicateFormula::And(parts) if parts.is_empty() => write!(f, "True({var})")?,
                    PredicateFormula::Atom(_) => write!(f, "{formula}")?,
                    _ => write!(f, "({formula})")?,
                }
            }
            writeln!(f)?;
        }
        writeln!(f, "PARTITION BY {}", self.partition_attribute)?;
        writeln!(f, "[config]")?;
        writeln!(f, "order = {}", self.order)?;
        writeln!(f, "theta = {:?}", self.theta)?;
        if let Some(h) = self.horizon {
            writeln!(f, "horizon = {h}")?;
        }
        let extras: Vec<String> = self.extras.iter().map(|e| e.to_string()).collect();
        writeln!(f, "extras = [{}]", extras.join(", "))
    }
}

/// Parses pattern text against `registry`.
pub fn parse_pattern(
    text: &str,
    registry: &PredicateRegistry,
) -> Result<PatternSpec, PatternError> {
    parser::parse(text, registry)
}

/// Parses a list of predicate calls such as `SpeedBetween(x, 0, 10), HeadingTowards(x, Port)`.
pub fn parse_predicate_list(
    text: &str,
    registry: &PredicateRegistry,
) -> Result<Vec<PredicateAtom>, PatternError> {
    parser::parse_calls(text, registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Const;
    use crate::geo::{builtin_registry, GeoContext, GeoPoint, Region};

    const PATTERN_1: &str = "\
# approaching a port
x · y+ · z WHERE
    Distance(x, PortCoords, 7.0, 10.0) AND Distance(y, PortCoords, 5.0, 7.0) AND
    WithinCircle(z, PortCoords, 5.0) PARTITION BY vesselId
";

    const PATTERN_2: &str = "\
x · y* · z WHERE
  (IsFishingVessel(x) ∧ ¬InArea(x, FishingArea)) AND
  (InArea(y, FishingArea) ∧ SpeedBetween(y, 9.0, 20.0)) AND
  (InArea(z, FishingArea) ∧ SpeedBetween(z, 1.0, 9.0))
PARTITION BY vesselId
[config]
order = 1
theta = 0.7
extras = [SpeedBetween(x, 0, 10.0), HeadingTowards(x, FishingArea)]
";

    fn registry() -> PredicateRegistry {
        let mut ctx = GeoContext::default();
        ctx.points
            .insert("PortCoords".into(), GeoPoint::new(-4.49, 48.38));
        ctx.regions.insert(
            "FishingArea".into(),
            Region::polygon(vec![
                GeoPoint::new(-5.0, 48.0),
                GeoPoint::new(-4.0, 48.0),
                GeoPoint::new(-4.0, 49.0),
                GeoPoint::new(-5.0, 49.0),
            ])
            .unwrap(),
        );
        builtin_registry(ctx)
    }

    #[test]
    fn approaching_pattern() {
        let spec = parse_pattern(PATTERN_1, &registry()).unwrap();
        assert_eq!(
            spec.ast,
            PatternAst::Concat(vec![
                PatternAst::leaf("x"),
                PatternAst::Plus(Box::new(PatternAst::leaf("y"))),
                PatternAst::leaf("z"),
            ])
        );
        assert_eq!(spec.bindings.len(), 3);
        assert_eq!(spec.partition_attribute, "vesselId");
        match spec.binding("x").unwrap() {
            PredicateFormula::Atom(a) => {
                assert_eq!(a.name, "Distance");
                assert_eq!(a.args[1..], [Const::Num(7.0), Const::Num(10.0)]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(spec.predicates().len(), 3);
    }

    #[test]
    fn trivial_pattern() {
        let spec = parse_pattern("x WHERE True(x)", &registry()).unwrap();
        assert_eq!(spec.ast, PatternAst::leaf("x"));
        assert_eq!(spec.bindings.len(), 1);
        assert_eq!(spec.partition_attribute, DEFAULT_PARTITION);
    }

    #[test]
    fn fishing_pattern_has_negated_conjunct() {
        let spec = parse_pattern(PATTERN_2, &registry()).unwrap();
        match spec.binding("x").unwrap() {
            PredicateFormula::And(parts) => {
                assert_eq!(parts.len(), 2);
                assert!(matches!(&parts[1], PredicateFormula::Not(inner)
                    if matches!(&**inner, PredicateFormula::Atom(a) if a.name == "InArea")));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(spec.order, 1);
        assert_eq!(spec.theta, 0.7);
        assert_eq!(spec.extras.len(), 2);
        // InArea appears for x, y and z but is one predicate
        assert_eq!(spec.pattern_predicates().len(), 4);
    }

    #[test]
    fn desugar_plus() {
        let spec = parse_pattern("x+ WHERE True(x)", &registry()).unwrap();
        assert_eq!(
            spec.ast.desugar(),
            PatternAst::Concat(vec![
                PatternAst::leaf("x"),
                PatternAst::Star(Box::new(PatternAst::leaf("x")))
            ])
        );
    }

    #[test]
    fn precedence_star_concat_union() {
        let spec = parse_pattern(
            "a · b* | c WHERE Eq(a, t, A) AND Eq(b, t, B) AND Eq(c, t, C)",
            &registry(),
        )
        .unwrap();
        assert_eq!(
            spec.ast,
            PatternAst::Union(vec![
                PatternAst::Concat(vec![
                    PatternAst::leaf("a"),
                    PatternAst::Star(Box::new(PatternAst::leaf("b")))
                ]),
                PatternAst::leaf("c"),
            ])
        );
    }

    #[test]
    fn inline_predicates() {
        let spec = parse_pattern(
            "SpeedBetween(x, 9.0, 20.0) ; y WHERE SpeedBetween(y, 1.0, 9.0)",
            &registry(),
        )
        .unwrap();
        assert_eq!(spec.bindings[0].0, "x");
        assert_eq!(spec.ast.vars(), vec!["x", "y"]);
    }

    #[test]
    fn errors() {
        let reg = registry();
        assert_eq!(
            parse_pattern("x · y WHERE True(x)", &reg).unwrap_err(),
            PatternError::UnboundVariable("y".into())
        );
        assert_eq!(
            parse_pattern("x WHERE Bogus(x)", &reg).unwrap_err(),
            PatternError::UnknownPredicate("Bogus".into())
        );
        match parse_pattern("x WHERE True(x)\n  )", &reg).unwrap_err() {
            PatternError::Parse { line, col, .. } => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_pattern("x · y WHERE True(x) OR True(y)", &reg),
            Err(PatternError::MixedVariables(_))
        ));
        assert!(matches!(
            parse_pattern(
                "x WHERE SpeedBetween(x, 1, 2)\n[config]\nextras = [SpeedBetween(x, 1, 2)]",
                &reg
            ),
            Err(PatternError::DuplicateExtra(_))
        ));
        assert!(matches!(
            parse_pattern("x WHERE True(x)\n[config]\ntheta = 0", &reg),
            Err(PatternError::InvalidConfig(_))
        ));
    }

    #[test]
    fn pretty_print_round_trip() {
        let reg = registry();
        for text in [PATTERN_1, PATTERN_2, "(a | b)+ · c* WHERE Eq(a, t, A) AND NOT Eq(b, t, A) AND (Eq(c, t, A) OR Between(c, s, -1, 2.5e1))"] {
            let spec = parse_pattern(text, &reg).unwrap();
            let printed = spec.to_string();
            let again = parse_pattern(&printed, &reg).unwrap_or_else(|e| panic!("{e}\n{printed}"));
            assert_eq!(spec, again, "{printed}");
        }
    }
}
