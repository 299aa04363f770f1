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

use super::{ColumnDef, PushdownPredicate, RowStream, ScanRequest, TableBackend};
use crate::io::{DataSource, DEFAULT_TAIL_HINT};
use crate::parquet::{
    prune_row_groups, read_field, LogicalType, ParquetFile, PhysicalType, SchemaTree, SimplePredicate,
};
use crate::sql::cell::DeferredCell;
use crate::sql::error::SqlError;
use crate::sql::stats::CostClass;
use crate::sql::ExecCtx;
use crate::value::Value;

/// A single Parquet file. Each (row group, top-level field) is one IO cell
/// that fetches and decodes the chunk; rows hold cheap cells indexing into it.
pub struct ParquetBackend {
    file: ParquetFile,
    nodes: Vec<usize>,
    columns: Vec<ColumnDef>,
}

impl ParquetBackend {
    pub async fn open(source: DataSource) -> Result<Self, SqlError> {
        Ok(Self::new(ParquetFile::open(source, DEFAULT_TAIL_HINT).await?))
    }

    pub fn new(file: ParquetFile) -> Self {
        let schema = &file.metadata.schema;
        let nodes = schema.top_level().to_vec();
        let columns = nodes
            .iter()
            .map(|&n| ColumnDef::new(schema.node(n).name.clone(), type_name(schema, n)))
            .collect();
        Self { file, nodes, columns }
    }

    pub fn file(&self) -> &ParquetFile {
        &self.file
    }

    /// Row groups that may hold rows satisfying every predicate.
    pub fn surviving_groups(&self, predicates: &[PushdownPredicate]) -> Vec<usize> {
        let mut keep = vec![true; self.file.metadata.row_groups.len()];
        for p in predicates {
            let Some(col) = self.columns.get(p.column) else { continue };
            let pred = SimplePredicate::new(col.name.clone(), p.op, p.value.clone());
            if let Ok(groups) = prune_row_groups(&self.file.metadata, &pred) {
                for (g, k) in keep.iter_mut().enumerate() {
                    *k &= groups.contains(&g);
                }
            }
        }
        keep.iter().enumerate().filter(|(_, k)| **k).map(|(g, _)| g).collect()
    }
}

pub(crate) fn type_name(schema: &SchemaTree, node: usize) -> String {
    let n = schema.node(node);
    let name = match (&n.physical, &n.logical) {
        (_, LogicalType::List) => "LIST",
        (_, LogicalType::Map) => "MAP",
        (None, _) => "STRUCT",
        (_, LogicalType::String | LogicalType::Enum | LogicalType::Json) => "VARCHAR",
        (_, LogicalType::Date) => "DATE",
        (_, LogicalType::Timestamp { .. }) => "TIMESTAMP",
        (_, LogicalType::Decimal { .. }) => "DECIMAL",
        (Some(PhysicalType::Boolean), _) => "BOOLEAN",
        (Some(PhysicalType::Int32 | PhysicalType::Int64), _) => "BIGINT",
        (Some(PhysicalType::Int96), _) => "TIMESTAMP",
        (Some(PhysicalType::Float | PhysicalType::Double), _) => "DOUBLE",
        (Some(_), _) => "BLOB",
    };
    if n.max_repetition_level > 0 && n.physical.is_some() {
        "LIST".to_string()
    } else {
        name.to_string()
    }
}

/// Fetches and assembles one top-level field of one row group.
pub(crate) fn chunk_cell(file: &ParquetFile, group: usize, node: usize) -> DeferredCell {
    let file = file.clone();
    DeferredCell::new(CostClass::Io, move |ctx: ExecCtx| async move {
        let values = read_field(&file.source, &file.metadata, group, node).await?;
        let rg = &file.metadata.row_groups[group];
        let bytes: i64 = file
            .metadata
            .schema
            .leaves_under(node)
            .iter()
            .map(|&l| rg.columns[l].total_compressed_size)
            .sum();
        ctx.stats.add_bytes(bytes.max(0) as u64);
        Ok(Value::List(Arc::new(values)))
    })
}

pub(crate) fn row_cell(chunk: DeferredCell, index: usize) -> DeferredCell {
    DeferredCell::new(CostClass::Cheap, move |ctx: ExecCtx| async move {
        match chunk.force(&ctx).await? {
            Value::List(values) => Ok(values.get(index).cloned().unwrap_or(Value::Null)),
            other => Err(SqlError::Eval(format!("chunk cell held {}", other.type_name()))),
        }
    })
}

impl TableBackend for ParquetBackend {
    fn kind(&self) -> &'static str {
        "parquet"
    }

    fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    fn estimated_rows(&self) -> Option<u64> {
        Some(self.file.metadata.num_rows.max(0) as u64)
    }

    fn accepts_pushdown(&self) -> bool {
        true
    }

    fn scan(&self, request: ScanRequest, _ctx: ExecCtx) -> RowStream {
        let groups = self.surviving_groups(&request.predicates);
        let file = self.file.clone();
        let nodes = self.nodes.clone();
        let needed = request.columns;
        let placeholder = DeferredCell::null();
        let rows = groups.into_iter().flat_map(move |g| {
            let chunks: Vec<Option<DeferredCell>> = nodes
                .iter()
                .enumerate()
                .map(|(c, &node)| needed.get(c).copied().unwrap_or(false).then(|| chunk_cell(&file, g, node)))
                .collect();
            let n = file.metadata.row_groups[g].num_rows.max(0) as usize;
            let placeholder = placeholder.clone();
            (0..n).map(move |i| {
                Ok(chunks
                    .iter()
                    .map(|c| match c {
                        Some(chunk) => row_cell(chunk.clone(), i),
                        None => placeholder.clone(),
                    })
                    .collect())
            })
        });
        futures::stream::iter(rows).boxed()
    }
}
