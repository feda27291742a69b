//! Scene documents: versioned JSON holding mirror systems.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::system::MirrorSystem;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: String,
    /// Beam cross-section dimension, 1 or 2.
    pub dimension: usize,
    pub systems: Vec<MirrorSystem>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
    /// Unrecognized entries kept by a lax parse, as `(path, value)`.
    #[serde(skip)]
    pub unknown: Vec<(Vec<PathSegment>, Value)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathSegment {
    Key(String),
    Index(usize),
}

fn render_path(path: &[PathSegment]) -> String {
    let mut s = String::new();
    for seg in path {
        match seg {
            PathSegment::Key(k) => {
                s.push('.');
                s.push_str(k);
            }
            PathSegment::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaMode {
    /// Unknown fields are errors.
    Strict,
    /// Unknown fields are kept and written back out.
    Lax,
}

impl SceneDocument {
    pub fn new(systems: Vec<MirrorSystem>) -> Self {
        let dimension = systems.first().map_or(2, |s| s.dimension());
        SceneDocument {
            version: SCHEMA_VERSION.into(),
            dimension,
            systems,
            metadata: BTreeMap::new(),
            unknown: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn parse(text: &str, mode: SchemaMode) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let version = raw
            .get("version")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema("missing schema version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema version {version} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
        let mut doc: SceneDocument = serde_json::from_value(raw.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        if doc.dimension != 1 && doc.dimension != 2 {
            return Err(Error::Schema(format!("dimension {} is not 1 or 2", doc.dimension)));
        }
        if let Some(s) = doc.systems.iter().find(|s| s.dimension() != doc.dimension) {
            return Err(Error::Schema(format!(
                "system of dimension {} in a dimension {} scene",
                s.dimension(),
                doc.dimension
            )));
        }
        let known = serde_json::to_value(&doc).map_err(|e| Error::Schema(e.to_string()))?;
        let mut unknown = Vec::new();
        collect_unknown(&raw, &known, &mut Vec::new(), &mut unknown);
        if mode == SchemaMode::Strict && !unknown.is_empty() {
            let names: Vec<String> = unknown.iter().map(|(p, _)| render_path(p)).collect();
            return Err(Error::Schema(format!("unknown fields: {}", names.join(", "))));
        }
        doc.unknown = unknown;
        Ok(doc)
    }

    /// Pretty JSON with a trailing newline; unknown entries from a lax
    /// parse are restored.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Schema(e.to_string()))?;
        for (path, value) in &self.unknown {
            insert_at(&mut v, path, value.clone());
        }
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Object keys present in `raw` but absent from `known`. Null entries
/// count as absent optional fields.
fn collect_unknown(raw: &Value, known: &Value, path: &mut Vec<PathSegment>, out: &mut Vec<(Vec<PathSegment>, Value)>) {
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, rv) in r {
                path.push(PathSegment::Key(key.clone()));
                match k.get(key) {
                    Some(kv) => collect_unknown(rv, kv, path, out),
                    None if rv.is_null() => {}
                    None => out.push((path.clone(), rv.clone())),
                }
                path.pop();
            }
        }
        (Value::Array(r), Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                path.push(PathSegment::Index(i));
                collect_unknown(rv, kv, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

fn insert_at(v: &mut Value, path: &[PathSegment], value: Value) {
    let Some((last, parents)) = path.split_last() else {
        return;
    };
    let mut cur = v;
    for seg in parents {
        let next = match (seg, cur) {
            (PathSegment::Key(k), Value::Object(m)) => m.get_mut(k),
            (PathSegment::Index(i), Value::Array(a)) => a.get_mut(*i),
            _ => None,
        };
        match next {
            Some(n) => cur = n,
            None => return,
        }
    }
    if let (PathSegment::Key(k), Value::Object(m)) = (last, cur) {
        m.insert(k.clone(), value);
    }
}
