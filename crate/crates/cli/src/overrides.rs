//! `key.path=value` overrides applied to a JSON config tree.

use anyhow::{anyhow, bail, Result};
use serde_json::Value;

/// Recursively merges `patch` into `base`; objects merge, everything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
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
        (b, p) => *b = p,
    }
}

/// Applies each `a.b.c=value` to `tree`. Values parse as JSON, falling back to
/// a plain string. The key path must already exist.
pub fn apply(tree: &mut Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("override {item:?} is not key=value"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut *tree;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| anyhow!("unknown config key {key:?}"))?,
                _ => bail!("config key {key:?} descends into a non-object"),
            };
        }
        *slot = value;
    }
    Ok(())
}
