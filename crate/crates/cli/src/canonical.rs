use serde_json::Value;

/// Keys holding wall-clock measurements start with this prefix.
pub const WALL_TIME_PREFIX: &str = "wall_time";

/// The report with every wall-time field removed, at any depth.
pub fn canonicalize(value: &Value) -> Value {
    match value {
        Value::Object(map) => Value::Object(
            map.iter()
                .filter(|(k, _)| !k.starts_with(WALL_TIME_PREFIX))
                .map(|(k, v)| (k.clone(), canonicalize(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}
