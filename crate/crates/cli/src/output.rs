//! Output formatting: JSON numbers keep their shortest round-trip form,
//! CSV numbers carry ten significant digits.

use serde_json::{Map, Value};

pub fn csv_num(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    format!("{v:.9e}")
}

pub fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_num).unwrap_or_default()
}

pub fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn json_opt(v: Option<f64>) -> Value {
    v.map(json_f64).unwrap_or(Value::Null)
}

pub fn obj<K: Into<String>>(pairs: Vec<(K, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.into(), v);
    }
    Value::Object(m)
}
