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

use std::sync::Arc;

use futures::StreamExt;

use super::{ColumnDef, RowStream, ScanRequest, TableBackend};
use crate::io::{Purpose, SourceResolver};
use crate::sql::cell::DeferredCell;
use crate::sql::error::SqlError;
use crate::sql::ExecCtx;
use crate::value::Value;

/// Fully materialized rows loaded from a row-oriented file.
pub struct RowTable {
    kind: &'static str,
    columns: Vec<ColumnDef>,
    rows: Arc<Vec<Vec<Value>>>,
}

impl RowTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Self {
        let types = infer_types(columns.len(), &rows);
        Self {
            kind: "memory",
            columns: columns.into_iter().zip(types).map(|(n, t)| ColumnDef::new(n, t)).collect(),
            rows: Arc::new(rows),
        }
    }

    pub async fn load_jsonl(uri: &str, resolver: &SourceResolver) -> Result<Self, SqlError> {
        let bytes = resolver.open(uri)?.read_all(Purpose::RowFile).await?;
        Self::from_jsonl(&bytes)
    }

    pub async fn load_csv(uri: &str, resolver: &SourceResolver) -> Result<Self, SqlError> {
        let bytes = resolver.open(uri)?.read_all(Purpose::RowFile).await?;
        Self::from_csv(&bytes)
    }

    /// One JSON object per line; the schema is the union of keys in first-seen order.
    pub fn from_jsonl(bytes: &[u8]) -> Result<Self, SqlError> {
        let text = std::str::from_utf8(bytes).map_err(|e| SqlError::Storage(format!("JSONL is not UTF-8: {e}")))?;
        let mut columns: Vec<String> = Vec::new();
        let mut objects = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| SqlError::Storage(format!("JSONL line {}: {e}", i + 1)))?;
            let serde_json::Value::Object(map) = doc else {
                return Err(SqlError::Storage(format!("JSONL line {}: expected an object", i + 1)));
            };
            for k in map.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
            objects.push(map);
        }
        let rows = objects
            .iter()
            .map(|m| columns.iter().map(|c| m.get(c).map(Value::from_json).unwrap_or(Value::Null)).collect())
            .collect();
        let mut table = Self::new(columns, rows);
        table.kind = "jsonl";
        Ok(table)
    }

    /// Header row required. Each column is typed as the narrowest of BIGINT,
    /// DOUBLE, BOOLEAN, VARCHAR that fits every non-empty field; empty fields are NULL.
    pub fn from_csv(bytes: &[u8]) -> Result<Self, SqlError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| SqlError::Storage(format!("CSV header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut raw: Vec<Vec<String>> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| SqlError::Storage(format!("CSV: {e}")))?;
            raw.push(rec.iter().map(str::to_string).collect());
        }
        let kinds: Vec<CsvKind> = (0..columns.len())
            .map(|c| CsvKind::infer(raw.iter().filter_map(|r| r.get(c)).map(String::as_str)))
            .collect();
        let rows = raw
            .into_iter()
            .map(|r| {
                (0..columns.len())
                    .map(|c| r.get(c).map_or(Value::Null, |f| kinds[c].convert(f)))
                    .collect()
            })
            .collect();
        let mut table = Self::new(columns, rows);
        table.kind = "csv";
        Ok(table)
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CsvKind {
    Int,
    Float,
    Bool,
    Text,
}

impl CsvKind {
    fn infer<'a>(fields: impl Iterator<Item = &'a str>) -> Self {
        let mut kind = CsvKind::Int;
        for f in fields.filter(|f| !f.is_empty()) {
            let fits = |k: CsvKind| match k {
                CsvKind::Int => f.parse::<i64>().is_ok(),
                CsvKind::Float => f.parse::<f64>().is_ok(),
                CsvKind::Bool => matches!(f.to_ascii_lowercase().as_str(), "true" | "false"),
                CsvKind::Text => true,
            };
            while !fits(kind) {
                kind = match kind {
                    CsvKind::Int => CsvKind::Float,
                    CsvKind::Float => CsvKind::Bool,
                    _ => CsvKind::Text,
                };
            }
        }
        kind
    }

    fn convert(self, f: &str) -> Value {
        if f.is_empty() {
            return Value::Null;
        }
        match self {
            CsvKind::Int => f.parse().map(Value::Int).unwrap_or(Value::Null),
            CsvKind::Float => f.parse().map(Value::Float).unwrap_or(Value::Null),
            CsvKind::Bool => Value::Boolean(f.eq_ignore_ascii_case("true")),
            CsvKind::Text => Value::string(f),
        }
    }
}

fn infer_types(width: usize, rows: &[Vec<Value>]) -> Vec<String> {
    (0..width)
        .map(|c| {
            let mut seen = rows.iter().filter_map(|r| r.get(c)).filter(|v| !v.is_null());
            match seen.next() {
                None => "NULL".to_string(),
                Some(first) => {
                    let t = first.type_name();
                    if seen.all(|v| v.type_name() == t) {
                        t.to_string()
                    } else {
                        "ANY".to_string()
                    }
                }
            }
        })
        .collect()
}

impl TableBackend for RowTable {
    fn kind(&self) -> &'static str {
        self.kind
    }

    fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    fn estimated_rows(&self) -> Option<u64> {
        Some(self.rows.len() as u64)
    }

    fn scan(&self, _request: ScanRequest, _ctx: ExecCtx) -> RowStream {
        let rows = self.rows.clone();
        futures::stream::iter((0..rows.len()).map(move |i| {
            Ok(rows[i].iter().cloned().map(DeferredCell::resolved).collect())
        }))
        .boxed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_unions_keys() {
        let t = RowTable::from_jsonl(b"{\"a\": 1}\n\n{\"b\": \"x\", \"a\": 2}\n").unwrap();
        let names: Vec<_> = t.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(t.rows()[0], vec![Value::Int(1), Value::Null]);
        assert!(RowTable::from_jsonl(b"[1]").is_err());
    }

    #[test]
    fn csv_infers_column_types() {
        let t = RowTable::from_csv(b"id,score,name,flag\n1,2.5,ann,true\n2,,007,false\n").unwrap();
        assert_eq!(t.rows()[1], vec![Value::Int(2), Value::Null, Value::string("007"), Value::Boolean(false)]);
        assert_eq!(t.rows()[0][1], Value::Float(2.5));
        assert_eq!(t.columns()[2].type_name, "VARCHAR");
    }
}
