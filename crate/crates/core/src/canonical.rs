//! Canonical JSON text for every on-disk artifact.
//!
//! Objects are written with sorted keys, two-space indentation and a trailing
//! newline. Documents carry `"schema_version": 1` at the top level.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl From<serde_json::Error> for CanonicalError {
    fn from(e: serde_json::Error) -> Self {
        CanonicalError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Renders any JSON value canonically. `serde_json::Map` is a `BTreeMap`
/// here (no `preserve_order` feature), so keys come out sorted.
pub fn value_to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("Value serialization is infallible");
    s.push('\n');
    s
}

/// Canonical text of a value without a schema envelope.
pub fn to_string<T: Serialize>(x: &T) -> Result<String, CanonicalError> {
    let v = serde_json::to_value(x).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
    Ok(value_to_string(&v))
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T, CanonicalError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Canonical text with a top-level `schema_version` field. `T` must
/// serialize to a JSON object.
pub fn to_versioned_string<T: Serialize>(x: &T) -> Result<String, CanonicalError> {
    let mut v = serde_json::to_value(x).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        }
        None => {
            return Err(CanonicalError::Serialize(
                "versioned document must be an object".into(),
            ))
        }
    }
    Ok(value_to_string(&v))
}

pub fn from_versioned_str<T: DeserializeOwned>(text: &str) -> Result<T, CanonicalError> {
    // Syntax errors are reported against the raw text first so the position
    // is exact; the typed pass below then checks the shape.
    let raw: Value = serde_json::from_str(text)?;
    let env: Envelope<T> = serde_json::from_value(raw).map_err(|e| CanonicalError::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(CanonicalError::SchemaVersion {
            found: env.schema_version,
        });
    }
    Ok(env.body)
}
