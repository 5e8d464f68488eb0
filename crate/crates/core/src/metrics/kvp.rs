use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scalar::Scalar;

/// Flattened leaf scalars of a canonical document, keyed by slash path.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvpSet {
    pub pairs: BTreeMap<String, String>,
}

impl KvpSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of pairs present in both sets with equal values.
    pub fn matches(&self, other: &KvpSet) -> usize {
        self.pairs
            .iter()
            .filter(|(k, v)| other.pairs.get(*k) == Some(*v))
            .count()
    }
}

/// Integral floats print as integers; strings stay quoted so `"1"` and `1`
/// remain distinct.
fn normalize(v: &Value) -> String {
    match v {
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => i.to_string(),
            (_, Some(u), _) => u.to_string(),
            (_, _, Some(f)) if f.fract() == 0.0 && f.abs() < 9.0e15 => (f as i64).to_string(),
            (_, _, Some(f)) => f.to_string(),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn sort_key(v: &Value) -> (String, i64) {
    let job = v
        .get("job_id")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let step = v
        .get("step_index")
        .or_else(|| v.get("step"))
        .and_then(Value::as_i64)
        .unwrap_or(-1);
    (job, step)
}

fn walk(v: &Value, path: &str, out: &mut BTreeMap<String, String>) {
    let join = |k: &str| {
        if path.is_empty() {
            k.to_string()
        } else {
            format!("{path}/{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                walk(x, &join(k), out);
            }
        }
        Value::Array(xs) => {
            let mut items: Vec<&Value> = xs.iter().collect();
            if items.iter().all(|x| x.is_object()) {
                items.sort_by_key(|x| sort_key(x));
            }
            for (i, x) in items.into_iter().enumerate() {
                walk(x, &join(&i.to_string()), out);
            }
        }
        leaf => {
            out.insert(path.to_string(), normalize(leaf));
        }
    }
}

/// Leaf pairs of `doc`. Arrays of objects are ordered by
/// `(job_id, step_index | step)` before positional indexing.
pub fn flatten_kvp(doc: &Value) -> KvpSet {
    let mut pairs = BTreeMap::new();
    walk(doc, "", &mut pairs);
    KvpSet { pairs }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

pub fn harmonic<T: Scalar>(p: T, r: T) -> T {
    if p + r == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * p * r / (p + r)
    }
}

/// Exact-match precision, recall and F1. An empty prediction has
/// precision 1 against an empty gold set and 0 otherwise; recall against
/// an empty gold set is 1.
pub fn emkvp<T: Scalar>(pred: &KvpSet, gold: &KvpSet) -> Prf<T> {
    let hit = T::from_usize_lossy(pred.matches(gold));
    let precision = match (pred.is_empty(), gold.is_empty()) {
        (true, true) => T::one(),
        (true, false) => T::zero(),
        _ => hit / T::from_usize_lossy(pred.len()),
    };
    let recall = if gold.is_empty() {
        T::one()
    } else {
        hit / T::from_usize_lossy(gold.len())
    };
    Prf {
        precision,
        recall,
        f1: harmonic(precision, recall),
    }
}
