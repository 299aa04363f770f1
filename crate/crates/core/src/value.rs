// Licensed to the Apache Software Foundation (ASF) under one
// or more contributor license agreements.  See the NOTICE file
// distributed with this work for additional information
// regarding copyright ownership.  The ASF licenses this file
// to you under the Apache License, Version 2.0 (the
// "License"); you may not use this file except in compliance
// with the License.  You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing,
// software distributed under the License is distributed on an
// "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, either express or implied.  See the License for the
// specific language governing permissions and limitations
// under the License.

//! Runtime values shared by the readers and the SQL engine.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use bytes::Bytes;
use serde_json::json;

/// Fixed-point decimal: `unscaled * 10^-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    pub unscaled: i128,
    pub scale: u32,
}

impl Decimal {
    pub fn new(unscaled: i128, scale: u32) -> Self {
        Self { unscaled, scale }
    }

    pub fn to_f64(self) -> f64 {
        self.unscaled as f64 / 10f64.powi(self.scale as i32)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.unscaled.unsigned_abs().to_string();
        let sign = if self.unscaled < 0 { "-" } else { "" };
        let scale = self.scale as usize;
        if scale == 0 {
            return write!(f, "{sign}{digits}");
        }
        let padded = if digits.len() <= scale {
            format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - scale);
        write!(f, "{sign}{int}.{frac}")
    }
}

/// A single cell value.
///
/// Timestamps are microseconds since the Unix epoch (UTC) and dates are days
/// since the epoch, whatever unit the source stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    Boolean(bool),
    Int(i64),
    Float(f64),
    String(Arc<str>),
    Binary(Bytes),
    Timestamp(i64),
    Date(i32),
    Decimal(Decimal),
    List(Arc<Vec<Value>>),
    Struct(Arc<Vec<(Arc<str>, Value)>>),
}

impl Value {
    pub fn string(s: impl Into<Arc<str>>) -> Self {
        Value::String(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "NULL",
            Value::Boolean(_) => "BOOLEAN",
            Value::Int(_) => "BIGINT",
            Value::Float(_) => "DOUBLE",
            Value::String(_) => "VARCHAR",
            Value::Binary(_) => "BLOB",
            Value::Timestamp(_) => "TIMESTAMP",
            Value::Date(_) => "DATE",
            Value::Decimal(_) => "DECIMAL",
            Value::List(_) => "LIST",
            Value::Struct(_) => "STRUCT",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Decimal(d) => Some(d.to_f64()),
            _ => None,
        }
    }

    /// Canonical JSON form used by the fixture oracles: binary as
    /// `{"$bytes": hex}`, temporal values as integers, decimals as fixed-point
    /// strings, structs as objects.
    pub fn to_canonical_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Boolean(b) => json!(b),
            Value::Int(v) => json!(v),
            Value::Float(v) => json!(v),
            Value::String(s) => json!(s.as_ref()),
            Value::Binary(b) => json!({ "$bytes": hex(b) }),
            Value::Timestamp(v) => json!(v),
            Value::Date(v) => json!(v),
            Value::Decimal(d) => json!(d.to_string()),
            Value::List(items) => {
                serde_json::Value::Array(items.iter().map(Value::to_canonical_json).collect())
            }
            Value::Struct(fields) => serde_json::Value::Object(
                fields
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_canonical_json()))
                    .collect(),
            ),
        }
    }

    /// JSON form for result output; temporal values render as ISO-8601 strings.
    pub fn to_output_json(&self) -> serde_json::Value {
        match self {
            Value::Timestamp(_) | Value::Date(_) => json!(self.to_string()),
            Value::List(items) => {
                serde_json::Value::Array(items.iter().map(Value::to_output_json).collect())
            }
            Value::Struct(fields) => serde_json::Value::Object(
                fields
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_output_json()))
                    .collect(),
            ),
            other => other.to_canonical_json(),
        }
    }

    /// Converts a JSON document value into a runtime value (used by the JSONL adapter).
    pub fn from_json(v: &serde_json::Value) -> Value {
        match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Boolean(*b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
            serde_json::Value::String(s) => Value::string(s.as_str()),
            serde_json::Value::Array(items) => {
                Value::List(Arc::new(items.iter().map(Value::from_json).collect()))
            }
            serde_json::Value::Object(map) => Value::Struct(Arc::new(
                map.iter()
                    .map(|(k, v)| (Arc::from(k.as_str()), Value::from_json(v)))
                    .collect(),
            )),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::String(s) => f.write_str(s),
            Value::Binary(b) => write!(f, "\\x{}", hex(b)),
            Value::Timestamp(micros) => match chrono::DateTime::from_timestamp_micros(*micros) {
                Some(ts) => write!(f, "{}", ts.format("%Y-%m-%d %H:%M:%S%.6f")),
                None => write!(f, "{micros}"),
            },
            Value::Date(days) => {
                let epoch = chrono::NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
                match epoch.checked_add_signed(chrono::Duration::days(*days as i64)) {
                    Some(d) => write!(f, "{d}"),
                    None => write!(f, "{days}"),
                }
            }
            Value::Decimal(d) => write!(f, "{d}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Struct(fields) => {
                f.write_str("{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Hashable, totally ordered wrapper used for grouping, joins and delete matching.
///
/// Equality is structural with one numeric relaxation: integers and floats
/// with the same numeric value compare equal. `Null == Null` holds here; SQL
/// join semantics exclude nulls before keys reach this type.
#[derive(Debug, Clone)]
pub struct KeyValue(pub Value);

impl PartialEq for KeyValue {
    fn eq(&self, other: &Self) -> bool {
        key_cmp(&self.0, &other.0) == Ordering::Equal
    }
}

impl Eq for KeyValue {}

impl Hash for KeyValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        hash_value(&self.0, state)
    }
}

fn hash_value<H: Hasher>(v: &Value, state: &mut H) {
    match v {
        Value::Null => 0u8.hash(state),
        Value::Boolean(b) => (1u8, b).hash(state),
        Value::Int(i) => numeric_hash(*i as f64, state),
        Value::Float(x) => numeric_hash(*x, state),
        Value::Decimal(d) => numeric_hash(d.to_f64(), state),
        Value::String(s) => (3u8, s.as_ref()).hash(state),
        Value::Binary(b) => (4u8, b.as_ref()).hash(state),
        Value::Timestamp(t) => (5u8, t).hash(state),
        Value::Date(d) => (6u8, d).hash(state),
        Value::List(items) => {
            7u8.hash(state);
            items.len().hash(state);
            for item in items.iter() {
                hash_value(item, state);
            }
        }
        Value::Struct(fields) => {
            8u8.hash(state);
            for (k, item) in fields.iter() {
                k.hash(state);
                hash_value(item, state);
            }
        }
    }
}

fn numeric_hash<H: Hasher>(x: f64, state: &mut H) {
    2u8.hash(state);
    let x = if x == 0.0 { 0.0 } else { x };
    x.to_bits().hash(state);
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Boolean(_) => 1,
        Value::Int(_) | Value::Float(_) | Value::Decimal(_) => 2,
        Value::String(_) => 3,
        Value::Binary(_) => 4,
        Value::Timestamp(_) => 5,
        Value::Date(_) => 6,
        Value::List(_) => 7,
        Value::Struct(_) => 8,
    }
}

/// Total order over values: numbers compare numerically across int/float,
/// values of different kinds order by kind.
pub fn key_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Boolean(x), Value::Boolean(y)) => x.cmp(y),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Decimal(x), Value::Decimal(y)) if x.scale == y.scale => x.unscaled.cmp(&y.unscaled),
        (x, y) if rank(x) == 2 && rank(y) == 2 => {
            let (fx, fy) = (x.as_f64().unwrap_or(0.0), y.as_f64().unwrap_or(0.0));
            fx.total_cmp(&fy)
        }
        (Value::String(x), Value::String(y)) => x.cmp(y),
        (Value::Binary(x), Value::Binary(y)) => x.cmp(y),
        (Value::Timestamp(x), Value::Timestamp(y)) => x.cmp(y),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::List(x), Value::List(y)) => {
            for (l, r) in x.iter().zip(y.iter()) {
                let c = key_cmp(l, r);
                if c != Ordering::Equal {
                    return c;
                }
            }
            x.len().cmp(&y.len())
        }
        (Value::Struct(x), Value::Struct(y)) => {
            for ((_, l), (_, r)) in x.iter().zip(y.iter()) {
                let c = key_cmp(l, r);
                if c != Ordering::Equal {
                    return c;
                }
            }
            x.len().cmp(&y.len())
        }
        (x, y) => rank(x).cmp(&rank(y)),
    }
}

/// SQL comparison: `None` when either side is NULL or the kinds are not comparable.
/// Temporal values compare with each other and with same-kind values only.
pub fn sql_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (Value::Decimal(x), Value::Decimal(y)) => Some(decimal_cmp(*x, *y)),
        (Value::Decimal(x), Value::Int(y)) => Some(decimal_cmp(*x, Decimal::new(*y as i128, 0))),
        (Value::Int(x), Value::Decimal(y)) => Some(decimal_cmp(Decimal::new(*x as i128, 0), *y)),
        (Value::Float(x), _) | (_, Value::Float(x)) if x.is_nan() => None,
        (Value::List(_), Value::List(_)) | (Value::Struct(_), Value::Struct(_)) => Some(key_cmp(a, b)),
        (x, y) if rank(x) == rank(y) && rank(x) < 7 => Some(key_cmp(x, y)),
        _ => None,
    }
}

fn decimal_cmp(x: Decimal, y: Decimal) -> Ordering {
    let scale = x.scale.max(y.scale);
    let up = |d: Decimal| d.unscaled.checked_mul(10i128.checked_pow(scale - d.scale)?);
    match (up(x), up(y)) {
        (Some(a), Some(b)) => a.cmp(&b),
        _ => x.to_f64().total_cmp(&y.to_f64()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sql_comparison_rules() {
        assert_eq!(sql_cmp(&Value::Int(2), &Value::Float(2.5)), Some(Ordering::Less));
        assert_eq!(
            sql_cmp(&Value::Decimal(Decimal::new(150, 2)), &Value::Decimal(Decimal::new(15, 1))),
            Some(Ordering::Equal)
        );
        assert_eq!(sql_cmp(&Value::Null, &Value::Int(1)), None);
        assert_eq!(sql_cmp(&Value::string("1"), &Value::Int(1)), None);
        assert_eq!(sql_cmp(&Value::Date(1), &Value::Date(2)), Some(Ordering::Less));
    }

    #[test]
    fn decimal_formatting_matches_fixed_point() {
        assert_eq!(Decimal::new(12345, 2).to_string(), "123.45");
        assert_eq!(Decimal::new(-120, 2).to_string(), "-1.20");
        assert_eq!(Decimal::new(5, 3).to_string(), "0.005");
        assert_eq!(Decimal::new(0, 4).to_string(), "0.0000");
        assert_eq!(Decimal::new(-7, 0).to_string(), "-7");
    }

    #[test]
    fn key_value_treats_int_and_float_alike() {
        let mut set = HashSet::new();
        set.insert(KeyValue(Value::Int(3)));
        assert!(set.contains(&KeyValue(Value::Float(3.0))));
        assert!(!set.contains(&KeyValue(Value::string("3"))));
        assert!(set.insert(KeyValue(Value::Null)));
        assert!(!set.insert(KeyValue(Value::Null)));
    }

    #[test]
    fn canonical_json_shapes() {
        let v = Value::Struct(Arc::new(vec![
            (Arc::from("b"), Value::Binary(Bytes::from_static(&[0xab, 0x01]))),
            (Arc::from("l"), Value::List(Arc::new(vec![Value::Int(1), Value::Null]))),
        ]));
        assert_eq!(
            v.to_canonical_json().to_string(),
            r#"{"b":{"$bytes":"ab01"},"l":[1,null]}"#
        );
    }

    #[test]
    fn timestamps_display_as_utc() {
        assert_eq!(Value::Timestamp(0).to_string(), "1970-01-01 00:00:00.000000");
        assert_eq!(Value::Date(19723).to_string(), "2024-01-01");
    }
}
