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

//! Client-side application of position and equality deletes.

use std::collections::HashSet;

use super::manifest::{FileContent, ScanTask, DELETE_FILE_PATH_ID, DELETE_POS_ID};
use super::metadata::IcebergSchema;
use super::IcebergError;
use crate::io::{DataSource, Purpose, SourceResolver, DEFAULT_TAIL_HINT};
use crate::parquet::{ParquetError, ParquetFile};
use crate::value::{KeyValue, Value};

#[derive(Debug, Clone)]
struct EqualityDelete {
    field_ids: Vec<i32>,
    keys: HashSet<Vec<KeyValue>>,
}

/// Decoded deletes applicable to one data file.
#[derive(Debug, Clone, Default)]
pub struct DeleteFilter {
    positions: HashSet<i64>,
    equality: Vec<EqualityDelete>,
}

impl DeleteFilter {
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty() && self.equality.is_empty()
    }

    /// Table field ids whose values are needed to evaluate equality deletes.
    pub fn equality_field_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self.equality.iter().flat_map(|e| e.field_ids.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn is_position_deleted(&self, position: i64) -> bool {
        self.positions.contains(&position)
    }

    /// Whether a row survives. `value_of` returns the row's value for a table field id.
    pub fn keep(&self, position: i64, mut value_of: impl FnMut(i32) -> Value) -> bool {
        if self.positions.contains(&position) {
            return false;
        }
        for eq in &self.equality {
            let key: Vec<KeyValue> = eq.field_ids.iter().map(|id| KeyValue(value_of(*id))).collect();
            if eq.keys.contains(&key) {
                return false;
            }
        }
        true
    }

    /// Fetches (one `delete_file` read each) and decodes every delete file of `task`.
    pub async fn load(task: &ScanTask, schema: &IcebergSchema, resolver: &SourceResolver) -> Result<Self, IcebergError> {
        let mut filter = DeleteFilter::default();
        for del in &task.deletes {
            let path = del.file_path.as_str();
            let bad = |message: String| IcebergError::DeleteFileCorrupt {
                path: path.to_string(),
                message,
            };
            let bytes = resolver.open(path)?.read_all(Purpose::DeleteFile).await?;
            let source = DataSource::memory(path, bytes, resolver.log().clone());
            let file = ParquetFile::open(source, DEFAULT_TAIL_HINT).await.map_err(|e| match e {
                ParquetError::Io(io) => IcebergError::Io(io),
                other => bad(other.to_string()),
            })?;
            let ps = &file.metadata.schema;
            let find = |id: i32, name: &str| -> Option<String> {
                let top = ps.top_level();
                top.iter()
                    .find(|&&n| ps.node(n).field_id == Some(id))
                    .or_else(|| top.iter().find(|&&n| ps.node(n).name == name))
                    .map(|&n| ps.node(n).name.clone())
            };
            match del.content {
                FileContent::PositionDeletes => {
                    let (Some(fp), Some(pos)) = (find(DELETE_FILE_PATH_ID, "file_path"), find(DELETE_POS_ID, "pos"))
                    else {
                        return Err(bad("missing file_path or pos column".into()));
                    };
                    let rows = file.read_rows(Some(&[&fp, &pos]), None).await.map_err(|e| bad(e.to_string()))?;
                    for r in rows {
                        match (&r[0], &r[1]) {
                            (Value::String(p), Value::Int(i)) => {
                                if p.as_ref() == task.data_file.file_path {
                                    filter.positions.insert(*i);
                                }
                            }
                            other => return Err(bad(format!("bad position delete row {other:?}"))),
                        }
                    }
                }
                FileContent::EqualityDeletes => {
                    let mut cols = Vec::with_capacity(del.equality_ids.len());
                    for id in &del.equality_ids {
                        let name = schema.field_by_id(*id).map(|f| f.name.as_str()).unwrap_or("");
                        cols.push(find(*id, name).ok_or_else(|| bad(format!("no column for equality field id {id}")))?);
                    }
                    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
                    let rows = file.read_rows(Some(&refs), None).await.map_err(|e| bad(e.to_string()))?;
                    filter.equality.push(EqualityDelete {
                        field_ids: del.equality_ids.clone(),
                        keys: rows.into_iter().map(|r| r.into_iter().map(KeyValue).collect()).collect(),
                    });
                }
                FileContent::Data => {}
            }
        }
        Ok(filter)
    }
}

/// Filters `(position, row)` pairs of one data file. `columns` gives the table
/// field id of each row position.
pub fn apply_deletes(
    rows: impl IntoIterator<Item = (i64, Vec<Value>)>,
    columns: &[i32],
    filter: &DeleteFilter,
) -> Vec<Vec<Value>> {
    rows.into_iter()
        .filter(|(pos, row)| {
            filter.keep(*pos, |id| {
                columns
                    .iter()
                    .position(|c| *c == id)
                    .map_or(Value::Null, |i| row[i].clone())
            })
        })
        .map(|(_, row)| row)
        .collect()
}
