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

//! Read-only Iceberg v2: metadata, manifests, scan planning and client-side deletes.

mod avro;
mod deletes;
mod manifest;
mod metadata;

use std::sync::Arc;

pub use avro::{read_container, AvroError, AvroValue, ContainerFile};
pub use deletes::{apply_deletes, DeleteFilter};
pub use manifest::{plan_scan, DataFileEntry, FileContent, ManifestFile, ScanPlan, ScanTask};
pub use metadata::{
    IcebergSchema, PartitionField, PartitionSpec, SchemaField, Snapshot, SnapshotSelector, TableMetadata,
};

use crate::io::{IoError, Purpose, SourceResolver, DEFAULT_TAIL_HINT};
use crate::parquet::{ParquetError, ParquetFile};
use crate::value::Value;

#[derive(Debug, thiserror::Error)]
pub enum IcebergError {
    #[error("unsupported table format version {0} (only v2 is supported)")]
    UnsupportedFormatVersion(i64),
    #[error("corrupt table metadata: {0}")]
    MetadataCorrupt(String),
    #[error("table has no current snapshot")]
    NoCurrentSnapshot,
    #[error("unknown snapshot id {0}")]
    UnknownSnapshotId(i64),
    #[error("corrupt manifest {path}: {message}")]
    ManifestCorrupt { path: String, message: String },
    #[error("unsupported avro feature in {path}: {message}")]
    UnsupportedAvroFeature { path: String, message: String },
    #[error("corrupt delete file {path}: {message}")]
    DeleteFileCorrupt { path: String, message: String },
    #[error(transparent)]
    Parquet(#[from] ParquetError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl IcebergError {
    pub(crate) fn from_avro(path: &str, e: AvroError) -> Self {
        match e {
            AvroError::Unsupported(message) => IcebergError::UnsupportedAvroFeature {
                path: path.to_string(),
                message,
            },
            AvroError::Corrupt(message) => IcebergError::ManifestCorrupt {
                path: path.to_string(),
                message,
            },
        }
    }
}

/// Fetches and parses a metadata JSON document (one `metadata_json` fetch).
pub async fn load_table_metadata(uri: &str, resolver: &SourceResolver) -> Result<TableMetadata, IcebergError> {
    let bytes = resolver.open(uri)?.read_all(Purpose::MetadataJson).await?;
    TableMetadata::parse(&bytes)
}

/// A table opened from a metadata-file URI.
#[derive(Clone)]
pub struct IcebergTable {
    pub uri: String,
    pub metadata: Arc<TableMetadata>,
    resolver: SourceResolver,
}

impl IcebergTable {
    pub async fn load(uri: &str, resolver: SourceResolver) -> Result<Self, IcebergError> {
        let metadata = Arc::new(load_table_metadata(uri, &resolver).await?);
        Ok(Self {
            uri: uri.to_string(),
            metadata,
            resolver,
        })
    }

    pub fn resolver(&self) -> &SourceResolver {
        &self.resolver
    }

    pub fn snapshot(&self, selector: SnapshotSelector) -> Result<&Snapshot, IcebergError> {
        self.metadata.resolve_snapshot(selector)
    }

    /// Schema of the selected snapshot; an empty table uses the current schema.
    pub fn schema(&self, selector: SnapshotSelector) -> &IcebergSchema {
        self.metadata.schema_for(self.snapshot(selector).ok())
    }

    pub async fn plan(&self, selector: SnapshotSelector) -> Result<ScanPlan, IcebergError> {
        let snapshot = self.snapshot(selector)?;
        plan_scan(&self.metadata, snapshot, &self.resolver).await
    }

    /// Reads every surviving row of the selected snapshot, columns in schema order.
    pub async fn read_rows(&self, selector: SnapshotSelector) -> Result<Vec<Vec<Value>>, IcebergError> {
        let plan = self.plan(selector).await?;
        let schema = self.schema(selector).clone();
        let field_ids: Vec<i32> = schema.fields.iter().map(|f| f.id).collect();
        let mut out = Vec::new();
        for task in &plan.tasks {
            let filter = DeleteFilter::load(task, &schema, &self.resolver).await?;
            let file = self.open_data_file(&task.data_file).await?;
            let rows = read_data_rows(&file, &schema).await?;
            out.extend(apply_deletes(
                rows.into_iter().enumerate().map(|(i, r)| (i as i64, r)),
                &field_ids,
                &filter,
            ));
        }
        Ok(out)
    }

    pub async fn open_data_file(&self, entry: &DataFileEntry) -> Result<ParquetFile, IcebergError> {
        let path = self.metadata.resolve_path(&entry.file_path);
        Ok(ParquetFile::open(self.resolver.open(&path)?, DEFAULT_TAIL_HINT).await?)
    }
}

/// For each table field, the matching top-level Parquet node: by field id, then by name.
pub fn column_mapping(file: &ParquetFile, schema: &IcebergSchema) -> Vec<Option<usize>> {
    let ps = &file.metadata.schema;
    schema
        .fields
        .iter()
        .map(|f| {
            let top = ps.top_level();
            top.iter()
                .copied()
                .find(|&n| ps.node(n).field_id == Some(f.id))
                .or_else(|| {
                    // Without ids, fall back to names only when the file carries no ids at all.
                    let any_ids = top.iter().any(|&n| ps.node(n).field_id.is_some());
                    (!any_ids).then(|| top.iter().copied().find(|&n| ps.node(n).name == f.name)).flatten()
                })
        })
        .collect()
}

/// Reads a data file's rows projected onto the table schema (missing columns are NULL).
pub async fn read_data_rows(file: &ParquetFile, schema: &IcebergSchema) -> Result<Vec<Vec<Value>>, IcebergError> {
    let mapping = column_mapping(file, schema);
    let names: Vec<String> = mapping
        .iter()
        .flatten()
        .map(|&n| file.metadata.schema.node(n).name.clone())
        .collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows = file.read_rows(Some(&name_refs), None).await?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let mut it = r.into_iter();
            mapping
                .iter()
                .map(|m| if m.is_some() { it.next().unwrap_or(Value::Null) } else { Value::Null })
                .collect()
        })
        .collect())
}
