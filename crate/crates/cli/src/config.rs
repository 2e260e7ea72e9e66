//! Layered command configuration: built-in defaults, then an optional JSON
//! file, then command-line flags.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// A flag value destined for a dotted config key.
pub type Override = (&'static str, Value);

pub fn push<T: Serialize>(out: &mut Vec<Override>, key: &'static str, value: &Option<T>) {
    if let Some(v) = value {
        out.push((key, serde_json::to_value(v).expect("flag values serialise")));
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !cur.get(*part).is_some_and(Value::is_object) {
            cur[*part] = Value::Object(Map::new());
        }
        cur = &mut cur[*part];
    }
    cur[parts[parts.len() - 1]] = value;
}

/// First key present in `given` but absent from `effective`, as a dotted path.
fn unknown_key(given: &Value, effective: &Value, prefix: &str) -> Option<String> {
    let Value::Object(g) = given else { return None };
    let Value::Object(e) = effective else { return None };
    for (k, v) in g {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match e.get(k) {
            None => return Some(path),
            Some(ev) => {
                if let Some(found) = unknown_key(v, ev, &path) {
                    return Some(found);
                }
            }
        }
    }
    None
}

/// Builds the effective configuration for one command.
pub fn resolve<C>(file: Option<&Path>, overrides: Vec<Override>) -> Result<C, CliError>
where
    C: Default + Serialize + DeserializeOwned,
{
    let mut merged = serde_json::to_value(C::default()).expect("defaults serialise");
    let mut given = Value::Object(Map::new());
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config("config", format!("{} is not valid JSON: {e}", path.display())))?;
        if !value.is_object() {
            return Err(CliError::config("config", format!("{} must hold a JSON object", path.display())));
        }
        given = value.clone();
        merge(&mut merged, value);
    }
    for (key, value) in overrides {
        set_path(&mut merged, key, value);
    }
    let config: C = serde_path_to_error::deserialize(merged).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(key, e.into_inner().to_string())
    })?;
    let effective = serde_json::to_value(&config).expect("config serialises");
    if let Some(key) = unknown_key(&given, &effective, "") {
        return Err(CliError::config(key, "unknown configuration key".into()));
    }
    Ok(config)
}
