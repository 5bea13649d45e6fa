//! JSON encoding for extended reals: an infinite value is written as `null`
//! next to a `<name>_infinite: true` flag, a finite one as a plain number.

use serde_json::{Map, Value};

pub fn put(map: &mut Map<String, Value>, key: &str, value: f64) {
    if value.is_infinite() {
        map.insert(key.to_string(), Value::Null);
        map.insert(format!("{key}_infinite"), Value::Bool(true));
    } else {
        map.insert(key.to_string(), serde_json::json!(value));
    }
}

/// Reads back a value written by [`put`].
pub fn get(map: &Map<String, Value>, key: &str) -> Option<f64> {
    if map.get(&format!("{key}_infinite")).and_then(Value::as_bool) == Some(true) {
        return Some(f64::INFINITY);
    }
    map.get(key).and_then(Value::as_f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = Map::new();
        put(&mut m, "a", 0.1 + 0.2);
        put(&mut m, "b", f64::INFINITY);
        let text = serde_json::to_string(&m).unwrap();
        let back: Map<String, Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(get(&back, "a"), Some(0.1 + 0.2));
        assert_eq!(get(&back, "b"), Some(f64::INFINITY));
        assert!(back["b"].is_null());
    }
}
