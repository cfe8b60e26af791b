//! Merging a flat JSON config file under the command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{config_err, CliResult};

/// Fields set on the command line win; the file fills the rest. Keys the
/// subcommand does not know are rejected.
pub fn merge<T>(flags: T, file: Option<&Path>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = file else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let parsed: Value = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let Value::Object(mut merged) = parsed else {
        return Err(config_err(format!("{} must hold a JSON object", path.display())));
    };
    let known = as_object(&T::default())?;
    if let Some(key) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(config_err(format!("unknown config key {key:?}")));
    }
    for (key, value) in as_object(&flags)? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| config_err(e.to_string()))
}

fn as_object<T: Serialize>(v: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v).map_err(|e| config_err(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(config_err("arguments must serialize to an object")),
    }
}
