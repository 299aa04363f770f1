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

//! Manifest lists, manifests and scan planning.

use std::collections::BTreeMap;
use std::sync::Arc;

use bytes::Bytes;
use futures::future::try_join_all;

use super::avro::{read_container, AvroValue};
use super::metadata::{Snapshot, TableMetadata};
use super::IcebergError;
use crate::io::{Purpose, SourceResolver};
use crate::value::Value;

/// Reserved field id of the `file_path` column in position-delete files.
pub const DELETE_FILE_PATH_ID: i32 = 2147483546;
/// Reserved field id of the `pos` column in position-delete files.
pub const DELETE_POS_ID: i32 = 2147483545;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileContent {
    Data,
    PositionDeletes,
    EqualityDeletes,
}

#[derive(Debug, Clone)]
pub struct ManifestFile {
    pub path: String,
    pub partition_spec_id: i32,
    /// 0 = data, 1 = deletes.
    pub content: i32,
    pub sequence_number: i64,
    pub added_snapshot_id: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFileEntry {
    pub content: FileContent,
    pub file_path: String,
    pub file_format: String,
    pub record_count: i64,
    pub data_sequence_number: i64,
    pub snapshot_id: Option<i64>,
    pub spec_id: i32,
    pub partition: Vec<(String, Value)>,
    pub equality_ids: Vec<i32>,
    pub lower_bounds: BTreeMap<i32, Bytes>,
    pub upper_bounds: BTreeMap<i32, Bytes>,
}

#[derive(Debug, Clone)]
pub struct ScanTask {
    pub data_file: DataFileEntry,
    /// Applicable deletes, in sequence-number order.
    pub deletes: Vec<DataFileEntry>,
}

#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub snapshot_id: i64,
    pub tasks: Vec<ScanTask>,
}

fn corrupt(path: &str, message: impl Into<String>) -> IcebergError {
    IcebergError::ManifestCorrupt {
        path: path.to_string(),
        message: message.into(),
    }
}

fn req_i64(rec: &AvroValue, name: &str, path: &str) -> Result<i64, IcebergError> {
    rec.field(name)
        .and_then(AvroValue::as_i64)
        .ok_or_else(|| corrupt(path, format!("missing or non-integer field {name}")))
}

fn req_str(rec: &AvroValue, name: &str, path: &str) -> Result<String, IcebergError> {
    rec.field(name)
        .and_then(AvroValue::as_str)
        .map(str::to_string)
        .ok_or_else(|| corrupt(path, format!("missing string field {name}")))
}

pub(crate) fn avro_to_value(v: &AvroValue) -> Value {
    match v {
        AvroValue::Null => Value::Null,
        AvroValue::Boolean(b) => Value::Boolean(*b),
        AvroValue::Int(i) => Value::Int(*i as i64),
        AvroValue::Long(i) => Value::Int(*i),
        AvroValue::Float(f) => Value::Float(*f as f64),
        AvroValue::Double(f) => Value::Float(*f),
        AvroValue::Bytes(b) => Value::Binary(b.clone()),
        AvroValue::String(s) => Value::string(s.as_str()),
        AvroValue::Record(fields) | AvroValue::Map(fields) => Value::Struct(Arc::new(
            fields.iter().map(|(k, v)| (Arc::from(k.as_str()), avro_to_value(v))).collect(),
        )),
        AvroValue::Array(items) => Value::List(Arc::new(items.iter().map(avro_to_value).collect())),
    }
}

/// `array<record{key: int, value: bytes}>` as written for bounds maps.
fn bounds(v: Option<&AvroValue>) -> BTreeMap<i32, Bytes> {
    let mut out = BTreeMap::new();
    if let Some(AvroValue::Array(items)) = v {
        for item in items {
            if let (Some(k), Some(AvroValue::Bytes(b))) =
                (item.field("key").and_then(AvroValue::as_i64), item.field("value"))
            {
                out.insert(k as i32, b.clone());
            }
        }
    }
    out
}

pub(crate) async fn read_manifest_list(
    meta: &TableMetadata,
    snapshot: &Snapshot,
    resolver: &SourceResolver,
) -> Result<Vec<ManifestFile>, IcebergError> {
    let path = meta.resolve_path(&snapshot.manifest_list);
    let bytes = resolver.open(&path)?.read_all(Purpose::ManifestList).await?;
    let file = read_container(&bytes).map_err(|e| IcebergError::from_avro(&path, e))?;
    file.records
        .iter()
        .map(|r| {
            Ok(ManifestFile {
                path: req_str(r, "manifest_path", &path)?,
                partition_spec_id: req_i64(r, "partition_spec_id", &path)? as i32,
                content: r.field("content").and_then(AvroValue::as_i64).unwrap_or(0) as i32,
                sequence_number: r
                    .field("sequence_number")
                    .and_then(AvroValue::as_i64)
                    .unwrap_or(snapshot.sequence_number),
                added_snapshot_id: r
                    .field("added_snapshot_id")
                    .and_then(AvroValue::as_i64)
                    .unwrap_or(snapshot.snapshot_id),
            })
        })
        .collect()
}

/// Live entries of one manifest; DELETED entries (status 2) are dropped.
pub(crate) async fn read_manifest(
    meta: &TableMetadata,
    manifest: &ManifestFile,
    resolver: &SourceResolver,
) -> Result<Vec<DataFileEntry>, IcebergError> {
    let path = meta.resolve_path(&manifest.path);
    let bytes = resolver.open(&path)?.read_all(Purpose::Manifest).await?;
    let file = read_container(&bytes).map_err(|e| IcebergError::from_avro(&path, e))?;
    let mut out = Vec::new();
    for rec in &file.records {
        let status = req_i64(rec, "status", &path)?;
        if status == 2 {
            continue;
        }
        let df = rec.field("data_file").ok_or_else(|| corrupt(&path, "entry without data_file"))?;
        let content = match df.field("content").and_then(AvroValue::as_i64).unwrap_or(0) {
            0 => FileContent::Data,
            1 => FileContent::PositionDeletes,
            2 => FileContent::EqualityDeletes,
            other => return Err(corrupt(&path, format!("unknown content type {other}"))),
        };
        let equality_ids: Vec<i32> = match df.field("equality_ids") {
            Some(AvroValue::Array(ids)) => ids.iter().filter_map(AvroValue::as_i64).map(|i| i as i32).collect(),
            _ => Vec::new(),
        };
        if (content == FileContent::EqualityDeletes) != !equality_ids.is_empty() {
            return Err(corrupt(&path, "equality_ids must be present exactly for equality deletes"));
        }
        let record_count = req_i64(df, "record_count", &path)?;
        if record_count < 0 {
            return Err(corrupt(&path, "negative record_count"));
        }
        // A null sequence number is inherited from the manifest (entries added by that snapshot).
        let data_sequence_number = rec
            .field("sequence_number")
            .and_then(AvroValue::as_i64)
            .unwrap_or(manifest.sequence_number);
        let partition = match df.field("partition") {
            Some(AvroValue::Record(fields)) => fields.iter().map(|(k, v)| (k.clone(), avro_to_value(v))).collect(),
            _ => Vec::new(),
        };
        out.push(DataFileEntry {
            content,
            file_path: req_str(df, "file_path", &path)?,
            file_format: df
                .field("file_format")
                .and_then(AvroValue::as_str)
                .unwrap_or("PARQUET")
                .to_string(),
            record_count,
            data_sequence_number,
            snapshot_id: rec
                .field("snapshot_id")
                .and_then(AvroValue::as_i64)
                .or(Some(manifest.added_snapshot_id)),
            spec_id: manifest.partition_spec_id,
            partition,
            equality_ids,
            lower_bounds: bounds(df.field("lower_bounds")),
            upper_bounds: bounds(df.field("upper_bounds")),
        });
    }
    Ok(out)
}

fn unpartitioned(meta: &TableMetadata, spec_id: i32) -> bool {
    meta.partition_specs.get(&spec_id).is_none_or(|s| s.fields.is_empty())
}

fn same_partition(meta: &TableMetadata, data: &DataFileEntry, delete: &DataFileEntry) -> bool {
    unpartitioned(meta, delete.spec_id) || (data.spec_id == delete.spec_id && data.partition == delete.partition)
}

/// Position deletes whose `file_path` bounds exclude the data file cannot apply to it.
fn path_in_bounds(data: &DataFileEntry, delete: &DataFileEntry) -> bool {
    let path = data.file_path.as_bytes();
    let lower_ok = delete
        .lower_bounds
        .get(&DELETE_FILE_PATH_ID)
        .is_none_or(|lo| lo.as_ref() <= path);
    let upper_ok = delete
        .upper_bounds
        .get(&DELETE_FILE_PATH_ID)
        .is_none_or(|hi| path <= hi.as_ref());
    lower_ok && upper_ok
}

pub(crate) fn applies(meta: &TableMetadata, data: &DataFileEntry, delete: &DataFileEntry) -> bool {
    if !same_partition(meta, data, delete) {
        return false;
    }
    match delete.content {
        FileContent::PositionDeletes => {
            delete.data_sequence_number >= data.data_sequence_number && path_in_bounds(data, delete)
        }
        FileContent::EqualityDeletes => delete.data_sequence_number > data.data_sequence_number,
        FileContent::Data => false,
    }
}

/// Reads the manifest list and every manifest (concurrently), then pairs each
/// data file with the delete files that apply to it.
pub async fn plan_scan(
    meta: &TableMetadata,
    snapshot: &Snapshot,
    resolver: &SourceResolver,
) -> Result<ScanPlan, IcebergError> {
    let manifests = read_manifest_list(meta, snapshot, resolver).await?;
    let entries = try_join_all(manifests.iter().map(|m| read_manifest(meta, m, resolver))).await?;
    let (mut data, mut deletes) = (Vec::new(), Vec::new());
    for e in entries.into_iter().flatten() {
        if e.content == FileContent::Data {
            data.push(e);
        } else {
            deletes.push(e);
        }
    }
    deletes.sort_by(|a, b| {
        a.data_sequence_number
            .cmp(&b.data_sequence_number)
            .then_with(|| a.file_path.cmp(&b.file_path))
    });
    let tasks = data
        .into_iter()
        .map(|d| {
            let applicable = deletes.iter().filter(|del| applies(meta, &d, del)).cloned().collect();
            ScanTask {
                data_file: d,
                deletes: applicable,
            }
        })
        .collect();
    Ok(ScanPlan {
        snapshot_id: snapshot.snapshot_id,
        tasks,
    })
}
