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

//! Table metadata JSON (format version 2).

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value as Json;

use super::IcebergError;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SchemaField {
    pub id: i32,
    pub name: String,
    #[serde(default)]
    pub required: bool,
    #[serde(rename = "type")]
    pub field_type: Json,
}

impl SchemaField {
    /// Primitive type name, or the nested kind (`struct`, `list`, `map`).
    pub fn type_name(&self) -> String {
        match &self.field_type {
            Json::String(s) => s.clone(),
            Json::Object(o) => o.get("type").and_then(Json::as_str).unwrap_or("unknown").to_string(),
            _ => "unknown".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IcebergSchema {
    #[serde(default)]
    pub schema_id: i32,
    pub fields: Vec<SchemaField>,
}

impl IcebergSchema {
    pub fn field_by_id(&self, id: i32) -> Option<&SchemaField> {
        self.fields.iter().find(|f| f.id == id)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PartitionField {
    pub source_id: i32,
    #[serde(default)]
    pub field_id: Option<i32>,
    pub name: String,
    pub transform: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PartitionSpec {
    pub spec_id: i32,
    pub fields: Vec<PartitionField>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Snapshot {
    pub snapshot_id: i64,
    #[serde(default)]
    pub parent_snapshot_id: Option<i64>,
    #[serde(default)]
    pub sequence_number: i64,
    #[serde(default)]
    pub timestamp_ms: i64,
    pub manifest_list: String,
    #[serde(default)]
    pub schema_id: Option<i32>,
    #[serde(default)]
    pub summary: BTreeMap<String, Json>,
}

impl Snapshot {
    /// `total-records` from the snapshot summary, when present.
    pub fn total_records(&self) -> Option<u64> {
        match self.summary.get("total-records")? {
            Json::String(s) => s.parse().ok(),
            Json::Number(n) => n.as_u64(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableMetadata {
    pub format_version: i64,
    pub table_uuid: String,
    pub location: String,
    pub current_snapshot_id: Option<i64>,
    pub snapshots: Vec<Snapshot>,
    pub schemas: BTreeMap<i32, IcebergSchema>,
    pub current_schema_id: i32,
    pub partition_specs: BTreeMap<i32, PartitionSpec>,
    pub last_sequence_number: i64,
}

/// Which snapshot to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSelector {
    Current,
    Id(i64),
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
struct RawMetadata {
    format_version: i64,
    table_uuid: String,
    location: String,
    #[serde(default)]
    current_snapshot_id: Option<i64>,
    #[serde(default)]
    snapshots: Vec<Snapshot>,
    #[serde(default)]
    schemas: Vec<IcebergSchema>,
    #[serde(default)]
    current_schema_id: i32,
    #[serde(default)]
    partition_specs: Vec<PartitionSpec>,
    #[serde(default)]
    last_sequence_number: i64,
}

impl TableMetadata {
    pub fn parse(bytes: &[u8]) -> Result<Self, IcebergError> {
        let doc: Json = serde_json::from_slice(bytes)
            .map_err(|e| IcebergError::MetadataCorrupt(format!("invalid JSON: {e}")))?;
        match doc.get("format-version").and_then(Json::as_i64) {
            Some(2) => {}
            Some(v) => return Err(IcebergError::UnsupportedFormatVersion(v)),
            None => return Err(IcebergError::MetadataCorrupt("missing format-version".into())),
        }
        let raw: RawMetadata =
            serde_json::from_value(doc).map_err(|e| IcebergError::MetadataCorrupt(e.to_string()))?;
        // -1 is the conventional "no snapshot" marker.
        let current = raw.current_snapshot_id.filter(|id| *id != -1);
        if let Some(id) = current {
            if !raw.snapshots.iter().any(|s| s.snapshot_id == id) {
                return Err(IcebergError::MetadataCorrupt(format!(
                    "current-snapshot-id {id} is not in the snapshot list"
                )));
            }
        }
        if raw.schemas.is_empty() {
            return Err(IcebergError::MetadataCorrupt("no schemas".into()));
        }
        Ok(TableMetadata {
            format_version: raw.format_version,
            table_uuid: raw.table_uuid,
            location: raw.location.trim_end_matches('/').to_string(),
            current_snapshot_id: current,
            snapshots: raw.snapshots,
            schemas: raw.schemas.into_iter().map(|s| (s.schema_id, s)).collect(),
            current_schema_id: raw.current_schema_id,
            partition_specs: raw.partition_specs.into_iter().map(|s| (s.spec_id, s)).collect(),
            last_sequence_number: raw.last_sequence_number,
        })
    }

    pub fn resolve_snapshot(&self, selector: SnapshotSelector) -> Result<&Snapshot, IcebergError> {
        let id = match selector {
            SnapshotSelector::Current => self.current_snapshot_id.ok_or(IcebergError::NoCurrentSnapshot)?,
            SnapshotSelector::Id(id) => id,
        };
        self.snapshots
            .iter()
            .find(|s| s.snapshot_id == id)
            .ok_or(IcebergError::UnknownSnapshotId(id))
    }

    /// Schema a snapshot was written with (falls back to the current schema).
    pub fn schema_for(&self, snapshot: Option<&Snapshot>) -> &IcebergSchema {
        let id = snapshot.and_then(|s| s.schema_id).unwrap_or(self.current_schema_id);
        self.schemas
            .get(&id)
            .or_else(|| self.schemas.get(&self.current_schema_id))
            .or_else(|| self.schemas.values().next())
            .expect("parse guarantees a schema")
    }

    /// Resolves a path from metadata: absolute URIs as-is, others under the table location.
    pub fn resolve_path(&self, path: &str) -> String {
        if path.contains("://") || path.starts_with('/') {
            path.to_string()
        } else {
            format!("{}/{}", self.location, path)
        }
    }
}
