use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A single attribute value carried by an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Str(Arc<str>),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Parses a raw text field: numbers first, then booleans, else a string.
    pub fn parse_field(raw: &str) -> Value {
        let trimmed = raw.trim();
        if let Ok(v) = trimmed.parse::<f64>() {
            return Value::Num(v);
        }
        match trimmed {
            "true" | "TRUE" | "True" => Value::Bool(true),
            "false" | "FALSE" | "False" => Value::Bool(false),
            _ => Value::Str(Arc::from(trimmed)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(Arc::from(v))
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

/// A timestamped attribute tuple belonging to one partition of the stream.
///
/// Attributes are kept in a small vector: events carry a handful of fields
/// and a linear scan beats hashing at that size.
///
/// Equality ignores attribute order.
#[derive(Debug, Clone)]
pub struct Event {
    pub timestamp: i64,
    pub partition: Arc<str>,
    attributes: Vec<(Arc<str>, Value)>,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.timestamp == other.timestamp
            && self.partition == other.partition
            && self.attributes.len() == other.attributes.len()
            && self.attributes.iter().all(|(k, v)| other.get(k) == Some(v))
    }
}

impl Event {
    pub fn new(timestamp: i64, partition: impl Into<Arc<str>>) -> Self {
        Event {
            timestamp,
            partition: partition.into(),
            attributes: Vec::new(),
        }
    }

    pub fn with(mut self, name: impl Into<Arc<str>>, value: impl Into<Value>) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: impl Into<Arc<str>>, value: impl Into<Value>) {
        let name = name.into();
        let value = value.into();
        match self.attributes.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => slot.1 = value,
            None => self.attributes.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|(k, _)| &**k == name)
            .map(|(_, v)| v)
    }

    pub fn attributes(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.attributes.iter().map(|(k, v)| (&**k, v))
    }

    /// Key used for partition contiguity. An attribute with the given name
    /// wins; otherwise the event's own partition key is used.
    pub fn partition_value(&self, attribute: &str) -> Arc<str> {
        match self.get(attribute) {
            Some(Value::Str(s)) => s.clone(),
            Some(other) => Arc::from(other.to_string()),
            None => self.partition.clone(),
        }
    }
}
