//! `report.json` construction.
//!
//! Every number in a report is wrapped as `{"value": x, "provenance": p}`
//! where `p` says where it came from.

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Fitted,
    Certificate,
    Config,
}

pub fn num(x: f64, p: Provenance) -> Value {
    json!({ "value": x, "provenance": p })
}

pub fn int(x: u64, p: Provenance) -> Value {
    json!({ "value": x, "provenance": p })
}

pub fn vector(xs: &[f64], p: Provenance) -> Value {
    json!({ "value": xs, "provenance": p })
}

pub fn opt(x: Option<f64>, p: Provenance) -> Value {
    x.map_or(Value::Null, |v| num(v, p))
}

pub fn measured(x: f64) -> Value {
    num(x, Provenance::Measured)
}

pub fn fitted(x: f64) -> Value {
    num(x, Provenance::Fitted)
}

pub fn certificate(x: f64) -> Value {
    num(x, Provenance::Certificate)
}

pub fn config(x: f64) -> Value {
    num(x, Provenance::Config)
}

/// Ordered JSON object builder.
#[derive(Debug, Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn build(self) -> Value {
        Value::Object(self.0)
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Value {
        o.build()
    }
}

/// Checks that every JSON number sits under a `value` key next to a
/// `provenance` key. Returns the pointer of the first offender.
pub fn untagged_number(v: &Value) -> Option<String> {
    fn walk(v: &Value, path: &str, tagged: bool) -> Option<String> {
        match v {
            Value::Number(_) if !tagged => Some(path.to_string()),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .find_map(|(k, x)| walk(x, &format!("{path}/{k}"), tagged)),
            Value::Object(map) => {
                let is_wrapper = map.len() == 2 && map.contains_key("value") && map.contains_key("provenance");
                map.iter().find_map(|(k, x)| {
                    let inner = is_wrapper && k == "value";
                    walk(x, &format!("{path}/{k}"), inner)
                })
            }
            _ => None,
        }
    }
    walk(v, "", false)
}

/// Removes the timestamp so that reports can be compared.
pub fn strip_timestamp(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
    }
    v
}
