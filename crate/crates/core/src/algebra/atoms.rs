//! Attribute-level predicate kernels that do not depend on any domain.

use std::sync::Arc;

use super::{AlgebraError, AtomKernel, Band, Event, Value};

/// Always true.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrueKernel;

impl AtomKernel for TrueKernel {
    fn eval(&self, _event: &Event) -> Result<bool, AlgebraError> {
        Ok(true)
    }
}

/// Equality of one attribute with a constant (string, number or bool).
#[derive(Debug, Clone)]
pub struct EqKernel {
    pub attribute: String,
    pub value: Value,
}

impl EqKernel {
    pub fn new(attribute: impl Into<String>, value: impl Into<Value>) -> Self {
        EqKernel {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

impl AtomKernel for EqKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        let actual = event
            .get(&self.attribute)
            .ok_or_else(|| AlgebraError::MissingAttribute(self.attribute.clone()))?;
        Ok(match (actual, &self.value) {
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            // categorical values read from text may arrive as numbers
            (a, b) => a.to_string() == b.to_string(),
        })
    }

    fn attributes(&self) -> Vec<String> {
        vec![self.attribute.clone()]
    }

    fn witnesses(&self) -> Vec<(String, Value)> {
        let other = match &self.value {
            Value::Num(v) => Value::Num(v + 1.0),
            Value::Bool(b) => Value::Bool(!b),
            Value::Str(s) => Value::Str(Arc::from(format!("{s}~"))),
        };
        vec![
            (self.attribute.clone(), self.value.clone()),
            (self.attribute.clone(), other),
        ]
    }
}

/// Half-open band `lo <= attr < hi` on a numeric attribute.
#[derive(Debug, Clone)]
pub struct BetweenKernel {
    pub attribute: String,
    pub lo: f64,
    pub hi: f64,
}

impl BetweenKernel {
    pub fn new(attribute: impl Into<String>, lo: f64, hi: f64) -> Self {
        BetweenKernel {
            attribute: attribute.into(),
            lo,
            hi,
        }
    }
}

pub(crate) fn numeric(event: &Event, attribute: &str) -> Result<f64, AlgebraError> {
    match event.get(attribute) {
        Some(Value::Num(v)) => Ok(*v),
        Some(_) => Err(AlgebraError::NotNumeric(attribute.to_string())),
        None => Err(AlgebraError::MissingAttribute(attribute.to_string())),
    }
}

impl AtomKernel for BetweenKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        let v = numeric(event, &self.attribute)?;
        Ok(self.lo <= v && v < self.hi)
    }

    fn band(&self) -> Option<Band> {
        Some(Band {
            quantity: format!("attr:{}", self.attribute),
            lo: self.lo,
            hi: self.hi,
        })
    }

    fn attributes(&self) -> Vec<String> {
        vec![self.attribute.clone()]
    }

    fn witnesses(&self) -> Vec<(String, Value)> {
        let mut points = vec![self.lo, self.hi, self.lo - 1.0];
        if self.lo.is_finite() && self.hi.is_finite() {
            points.push((self.lo + self.hi) / 2.0);
        }
        points
            .into_iter()
            .filter(|v| v.is_finite())
            .map(|v| (self.attribute.clone(), Value::Num(v)))
            .collect()
    }
}

pub fn true_kernel() -> Arc<dyn AtomKernel> {
    Arc::new(TrueKernel)
}
