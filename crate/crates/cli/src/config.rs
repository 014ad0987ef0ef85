//! Layered JSON configuration: built-in defaults, then the `--config` file,
//! then command-line flags. Every flag names the JSON path it overrides.

use std::path::Path;

use pqr_lab::{Error, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Recursively merges `top` into `base`; objects merge key by key, anything
/// else is replaced.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets a dotted path such as `density.epsilon`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, v: Value) {
    let mut cur = root;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().expect("object");
        if parts.peek().is_none() {
            obj.insert(part.to_string(), v);
            return;
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

/// Flag overrides collected as `(json path, value)` pairs.
#[derive(Default)]
pub struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    pub fn set<T: Into<Value>>(&mut self, path: &'static str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((path, v.into()));
        }
    }

    pub fn set_value(&mut self, path: &'static str, v: Value) {
        self.0.push((path, v));
    }
}

pub fn resolve<T: DeserializeOwned>(defaults: Value, file: Option<&Path>, flags: Overrides) -> Result<(T, Value)> {
    let mut cfg = defaults;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text)?;
        if !v.is_object() {
            return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
        }
        merge(&mut cfg, v);
    }
    for (path, v) in flags.0 {
        set_path(&mut cfg, path, v);
    }
    let typed = serde_json::from_value(cfg.clone())?;
    Ok((typed, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn precedence() {
        let mut d = json!({"a": 1, "b": {"c": 2, "d": 3}});
        merge(&mut d, json!({"b": {"c": 20}, "e": 5}));
        assert_eq!(d, json!({"a": 1, "b": {"c": 20, "d": 3}, "e": 5}));
        set_path(&mut d, "b.c", json!(200));
        set_path(&mut d, "x.y", json!(true));
        assert_eq!(d["b"]["c"], 200);
        assert_eq!(d["x"]["y"], true);
    }
}
