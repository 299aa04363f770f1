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

use futures::{StreamExt, TryStreamExt};

use super::parquet::{chunk_cell, row_cell};
use super::{ColumnDef, PushdownPredicate, RowStream, ScanRequest, TableBackend};
use crate::iceberg::{column_mapping, DeleteFilter, IcebergError, IcebergSchema, IcebergTable, SnapshotSelector};
use crate::io::SourceResolver;
use crate::parquet::{prune_row_groups, ParquetFile, SimplePredicate};
use crate::sql::cell::DeferredCell;
use crate::sql::error::SqlError;
use crate::sql::ExecCtx;
use crate::value::Value;

/// One snapshot of an Iceberg table, read merge-on-read.
pub struct IcebergBackend {
    table: IcebergTable,
    selector: SnapshotSelector,
    schema: IcebergSchema,
    columns: Vec<ColumnDef>,
}

impl IcebergBackend {
    pub async fn open(uri: &str, resolver: SourceResolver) -> Result<Self, SqlError> {
        Ok(Self::new(IcebergTable::load(uri, resolver).await?, SnapshotSelector::Current))
    }

    pub fn new(table: IcebergTable, selector: SnapshotSelector) -> Self {
        let schema = table.schema(selector).clone();
        let columns = schema
            .fields
            .iter()
            .map(|f| ColumnDef::new(f.name.clone(), f.type_name().to_ascii_uppercase()))
            .collect();
        Self {
            table,
            selector,
            schema,
            columns,
        }
    }

    pub fn table(&self) -> &IcebergTable {
        &self.table
    }
}

impl TableBackend for IcebergBackend {
    fn kind(&self) -> &'static str {
        "iceberg"
    }

    fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    fn estimated_rows(&self) -> Option<u64> {
        match self.table.snapshot(self.selector) {
            Ok(s) => s.total_records(),
            Err(IcebergError::NoCurrentSnapshot) => Some(0),
            Err(_) => None,
        }
    }

    fn accepts_pushdown(&self) -> bool {
        true
    }

    fn scan(&self, request: ScanRequest, ctx: ExecCtx) -> RowStream {
        if matches!(self.table.snapshot(self.selector), Err(IcebergError::NoCurrentSnapshot)) {
            return futures::stream::empty().boxed();
        }
        let table = self.table.clone();
        let selector = self.selector;
        let schema = Arc::new(self.schema.clone());
        let request = Arc::new(request);
        let planner = table.clone();
        futures::stream::once(async move { planner.plan(selector).await.map_err(SqlError::from) })
            .map_ok(|plan| futures::stream::iter(plan.tasks.into_iter().map(Ok::<_, SqlError>)))
            .try_flatten()
            .and_then(move |task| {
                let (table, schema, request, ctx) = (table.clone(), schema.clone(), request.clone(), ctx.clone());
                async move {
                    let filter = DeleteFilter::load(&task, &schema, table.resolver()).await?;
                    let file = table.open_data_file(&task.data_file).await?;
                    Ok(file_rows(file, filter, &schema, &request, ctx))
                }
            })
            .try_flatten()
            .boxed()
    }
}

/// Rows of one data file projected onto the table schema, with deletes applied.
fn file_rows(
    file: ParquetFile,
    filter: DeleteFilter,
    schema: &IcebergSchema,
    request: &ScanRequest,
    ctx: ExecCtx,
) -> RowStream {
    let mapping = column_mapping(&file, schema);
    let eq_cols: Vec<(i32, usize)> = filter
        .equality_field_ids()
        .into_iter()
        .filter_map(|id| schema.fields.iter().position(|f| f.id == id).map(|c| (id, c)))
        .collect();
    let wanted: Vec<bool> = (0..schema.fields.len())
        .map(|c| request.columns.get(c).copied().unwrap_or(false) || eq_cols.iter().any(|(_, ec)| *ec == c))
        .collect();
    let groups = surviving_groups(&file, &mapping, &request.predicates);

    // Positions count every row of the file, including those in skipped groups.
    let mut starts = Vec::with_capacity(file.metadata.row_groups.len());
    let mut acc = 0i64;
    for rg in &file.metadata.row_groups {
        starts.push(acc);
        acc += rg.num_rows;
    }

    let placeholder = DeferredCell::null();
    let rows = groups.into_iter().flat_map(move |g| {
        let chunks: Vec<Option<DeferredCell>> = mapping
            .iter()
            .zip(&wanted)
            .map(|(m, &w)| match (m, w) {
                (Some(node), true) => Some(chunk_cell(&file, g, *node)),
                _ => None,
            })
            .collect();
        let n = file.metadata.row_groups[g].num_rows.max(0) as usize;
        let start = starts[g];
        let placeholder = placeholder.clone();
        (0..n).map(move |i| {
            let cells: Vec<DeferredCell> = chunks
                .iter()
                .map(|c| match c {
                    Some(chunk) => row_cell(chunk.clone(), i),
                    None => placeholder.clone(),
                })
                .collect();
            (start + i as i64, cells)
        })
    });

    let filter = Arc::new(filter);
    futures::stream::iter(rows)
        .filter_map(move |(pos, cells)| {
            let (filter, ctx, eq_cols) = (filter.clone(), ctx.clone(), eq_cols.clone());
            async move {
                if filter.is_position_deleted(pos) {
                    return None;
                }
                if eq_cols.is_empty() {
                    return Some(Ok(cells));
                }
                let mut values = Vec::with_capacity(eq_cols.len());
                for (id, c) in &eq_cols {
                    match cells[*c].force(&ctx).await {
                        Ok(v) => values.push((*id, v)),
                        Err(e) => return Some(Err(e)),
                    }
                }
                let lookup = |id: i32| {
                    values
                        .iter()
                        .find(|(i, _)| *i == id)
                        .map(|(_, v)| v.clone())
                        .unwrap_or(Value::Null)
                };
                filter.keep(pos, lookup).then_some(Ok(cells))
            }
        })
        .boxed()
}

fn surviving_groups(file: &ParquetFile, mapping: &[Option<usize>], predicates: &[PushdownPredicate]) -> Vec<usize> {
    let meta = &file.metadata;
    let mut keep = vec![true; meta.row_groups.len()];
    for p in predicates {
        let Some(Some(node)) = mapping.get(p.column) else { continue };
        let name = meta.schema.node(*node).name.clone();
        if let Ok(groups) = prune_row_groups(meta, &SimplePredicate::new(name, p.op, p.value.clone())) {
            for (g, k) in keep.iter_mut().enumerate() {
                *k &= groups.contains(&g);
            }
        }
    }
    keep.iter().enumerate().filter(|(_, k)| **k).map(|(g, _)| g).collect()
}
