//! Canonical JSON encoding: object keys sorted, shortest round-trip floats.

use serde::Serialize;

use crate::error::Result;

/// Serializes `value` with every object's keys in sorted order, so equal
/// values always produce identical bytes.
pub fn canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps object keys in a sorted map.
    let tree = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&tree)?)
}

pub fn canonical_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&tree)?)
}
