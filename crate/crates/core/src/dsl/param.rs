use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A concrete parameter or property value.
///
/// Numbers are normalized on construction: an integral float becomes
/// `Int`, so `200.0` and `200` compare and serialize identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn number(x: f64) -> Self {
        if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 {
            ParamValue::Int(x as i64)
        } else {
            ParamValue::Float(x)
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        ParamValue::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Re-applies number normalization (deserialized floats may be integral).
    pub fn normalized(self) -> Self {
        match self {
            ParamValue::Float(f) => ParamValue::number(f),
            other => other,
        }
    }
}

impl Ord for ParamValue {
    /// Numbers before text; numbers by value, text lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.as_text().cmp(&other.as_text()),
        }
    }
}

impl PartialOrd for ParamValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ParamValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ParamValue {}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(i: i64) -> Self {
        ParamValue::Int(i)
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::number(x)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    DiscreteSet,
    ContinuousInterval,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.min - 1e-9 <= x && x <= self.max + 1e-9
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }
}

/// Value domain of one parameter or property field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub kind: ParamKind,
    #[serde(default)]
    pub values: Vec<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    #[serde(default)]
    pub unit: String,
}

impl ParamSpec {
    pub fn discrete(values: impl IntoIterator<Item = ParamValue>, unit: impl Into<String>) -> Self {
        let values: BTreeSet<ParamValue> = values.into_iter().map(ParamValue::normalized).collect();
        ParamSpec {
            kind: ParamKind::DiscreteSet,
            values: values.into_iter().collect(),
            interval: None,
            unit: unit.into(),
        }
    }

    pub fn continuous(min: f64, max: f64, unit: impl Into<String>) -> Self {
        ParamSpec {
            kind: ParamKind::ContinuousInterval,
            values: Vec::new(),
            interval: Some(Interval { min, max }),
            unit: unit.into(),
        }
    }

    pub fn mixed(
        values: impl IntoIterator<Item = ParamValue>,
        min: f64,
        max: f64,
        unit: impl Into<String>,
    ) -> Self {
        let values: BTreeSet<ParamValue> = values.into_iter().map(ParamValue::normalized).collect();
        ParamSpec {
            kind: ParamKind::Mixed,
            values: values.into_iter().collect(),
            interval: Some(Interval { min, max }),
            unit: unit.into(),
        }
    }

    /// Kind-specific shape problems; empty when well formed.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.kind {
            ParamKind::DiscreteSet => {
                if self.values.is_empty() {
                    out.push("discrete-set with no values".to_string());
                }
            }
            ParamKind::ContinuousInterval => match self.interval {
                None => out.push("continuous-interval without interval".to_string()),
                Some(iv) if !(iv.min <= iv.max) => {
                    out.push(format!("interval min {} > max {}", iv.min, iv.max))
                }
                _ => {}
            },
            ParamKind::Mixed => {
                if self.values.is_empty() {
                    out.push("mixed with no values".to_string());
                }
                match self.interval {
                    None => out.push("mixed without interval".to_string()),
                    Some(iv) if !(iv.min <= iv.max) => {
                        out.push(format!("interval min {} > max {}", iv.min, iv.max))
                    }
                    _ => {}
                }
            }
        }
        out
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        let in_values = self.values.iter().any(|x| x == v);
        let in_interval = match (self.interval, v.as_f64()) {
            (Some(iv), Some(x)) => iv.contains(x),
            _ => false,
        };
        match self.kind {
            ParamKind::DiscreteSet => in_values,
            ParamKind::ContinuousInterval => in_interval,
            ParamKind::Mixed => in_values || in_interval,
        }
    }

    /// Union of two value domains. Identical kinds keep their kind; a
    /// discrete set joined with anything carrying an interval becomes mixed.
    pub fn union(&self, other: &ParamSpec) -> ParamSpec {
        let values: BTreeSet<ParamValue> =
            self.values.iter().chain(&other.values).cloned().collect();
        let interval = match (self.interval, other.interval) {
            (Some(a), Some(b)) => Some(a.hull(&b)),
            (a, b) => a.or(b),
        };
        let kind = if self.kind == other.kind {
            self.kind
        } else {
            ParamKind::Mixed
        };
        let unit = if self.unit.is_empty() {
            other.unit.clone()
        } else {
            self.unit.clone()
        };
        let mut spec = ParamSpec {
            kind,
            values: values.into_iter().collect(),
            interval,
            unit,
        };
        if spec.kind == ParamKind::Mixed && spec.interval.is_none() {
            spec.kind = ParamKind::DiscreteSet;
        }
        if spec.kind == ParamKind::Mixed && spec.values.is_empty() {
            spec.kind = ParamKind::ContinuousInterval;
        }
        if spec.kind == ParamKind::ContinuousInterval {
            spec.values.clear();
        }
        spec
    }
}
