//! JSON config files with `--set key=value` overrides.
//!
//! The config is serialized to a JSON tree, each override replaces one
//! existing leaf (dotted path), and the tree is deserialized again so the
//! target type's own unknown-field checks apply. Values are parsed as JSON
//! where possible (`3`, `1e-3`, `true`, `null`, `[1,2]`) and taken as strings
//! otherwise.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use lfx_core::{LfError, Result};

pub fn load_config<T: Serialize + DeserializeOwned>(default: T, path: Option<&Path>, sets: &[String]) -> Result<T> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LfError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| LfError::config(format!("{}: {e}", p.display())))?
        }
        None => default,
    };
    if sets.is_empty() {
        return Ok(base);
    }
    let mut tree = serde_json::to_value(&base).map_err(|e| LfError::config(e.to_string()))?;
    for s in sets {
        apply(&mut tree, s)?;
    }
    serde_json::from_value(tree).map_err(|e| LfError::config(format!("after overrides: {e}")))
}

fn apply(tree: &mut Value, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| LfError::config(format!("override `{set}` is not key=value")))?;
    let unknown = || LfError::config(format!("unknown config key `{key}`"));
    let mut node = tree;
    for part in key.split('.') {
        node = node.as_object_mut().and_then(|m| m.get_mut(part)).ok_or_else(unknown)?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}
