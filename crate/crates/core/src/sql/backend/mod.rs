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

//! Scan backends: schema discovery, optional pushdown, and a pull-based
//! stream of rows made of deferred cells.

mod iceberg;
mod parquet;
mod rows;

use std::sync::Arc;

use futures::stream::BoxStream;

pub use self::iceberg::IcebergBackend;
pub use self::parquet::ParquetBackend;
pub use self::rows::RowTable;

use super::cell::{DeferredCell, ExecCtx};
use super::error::SqlError;
use crate::io::SourceResolver;
use crate::parquet::CompareOp;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub type_name: String,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, type_name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            type_name: type_name.into(),
        }
    }
}

/// `column op value`, offered to backends that can skip data with it. The
/// engine still evaluates the full predicate on every row it receives.
#[derive(Debug, Clone, PartialEq)]
pub struct PushdownPredicate {
    pub column: usize,
    pub op: CompareOp,
    pub value: Value,
}

#[derive(Debug, Clone, Default)]
pub struct ScanRequest {
    /// Which columns the query reads; other positions may hold a shared placeholder.
    pub columns: Vec<bool>,
    pub predicates: Vec<PushdownPredicate>,
}

impl ScanRequest {
    pub fn all(width: usize) -> Self {
        Self {
            columns: vec![true; width],
            predicates: vec![],
        }
    }
}

/// Rows with one cell per column, in schema order.
pub type RowStream = BoxStream<'static, Result<Vec<DeferredCell>, SqlError>>;

pub trait TableBackend: Send + Sync {
    fn kind(&self) -> &'static str;

    fn columns(&self) -> &[ColumnDef];

    /// Row count from metadata, when known without scanning.
    fn estimated_rows(&self) -> Option<u64> {
        None
    }

    fn accepts_pushdown(&self) -> bool {
        false
    }

    fn scan(&self, request: ScanRequest, ctx: ExecCtx) -> RowStream;
}

/// Opens a backend chosen by the URI's suffix: `.parquet`, `metadata.json`
/// (Iceberg), `.jsonl`/`.ndjson`, or `.csv`.
pub async fn open_backend(uri: &str, resolver: &SourceResolver) -> Result<Arc<dyn TableBackend>, SqlError> {
    let lower = uri.to_ascii_lowercase();
    let path = lower.split(['?', '#']).next().unwrap_or("");
    if path.ends_with(".parquet") {
        Ok(Arc::new(ParquetBackend::open(resolver.open(uri)?).await?))
    } else if path.ends_with("metadata.json") {
        Ok(Arc::new(IcebergBackend::open(uri, resolver.clone()).await?))
    } else if path.ends_with(".jsonl") || path.ends_with(".ndjson") {
        Ok(Arc::new(RowTable::load_jsonl(uri, resolver).await?))
    } else if path.ends_with(".csv") {
        Ok(Arc::new(RowTable::load_csv(uri, resolver).await?))
    } else {
        Err(SqlError::bind(format!(
            "cannot tell the format of '{uri}'; expected a .parquet, metadata.json, .jsonl or .csv URI"
        )))
    }
}
