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

use std::collections::HashMap;
use std::sync::Arc;

use futures::future::try_join_all;

use super::assemble::assemble_field;
use super::metadata::{ColumnChunkMeta, FileMetadata};
use super::page::{decode_chunk, DecodedColumn};
use super::prune::{prune_row_groups, SimplePredicate};
use super::schema::SchemaNode;
use super::ParquetError;
use crate::io::{ByteRange, DataSource, Purpose};
use crate::value::Value;

const MAGIC: &[u8; 4] = b"PAR1";
const ENCRYPTED_MAGIC: &[u8; 4] = b"PARE";

/// Reads and decodes the footer: one tail read, plus one footer read if the
/// footer is longer than the tail.
pub async fn read_footer(source: &DataSource, tail_hint: u64) -> Result<FileMetadata, ParquetError> {
    let (tail, len) = match source.read_tail(tail_hint, Purpose::Tail).await {
        Ok(t) => t,
        Err(crate::io::IoError::EmptyFile(url)) => return Err(ParquetError::NotParquet(format!("{url} is empty"))),
        Err(e) => return Err(e.into()),
    };
    if len < 12 {
        return Err(ParquetError::NotParquet(format!(
            "{} is {len} bytes, shorter than the parquet envelope",
            source.url()
        )));
    }
    let trailer = &tail[tail.len() - 8..];
    if &trailer[4..] == ENCRYPTED_MAGIC {
        return Err(ParquetError::UnsupportedFeature("encrypted footer".into()));
    }
    if &trailer[4..] != MAGIC {
        return Err(ParquetError::NotParquet(format!("{} lacks the trailing magic", source.url())));
    }
    let footer_len = u32::from_le_bytes(trailer[..4].try_into().expect("4 bytes")) as u64;
    if footer_len + 8 > len - 4 {
        return Err(ParquetError::FooterCorrupt(format!(
            "footer length {footer_len} exceeds file length {len}"
        )));
    }
    let footer = if footer_len + 8 <= tail.len() as u64 {
        let end = tail.len() - 8;
        tail.slice(end - footer_len as usize..end)
    } else {
        source
            .read_range(ByteRange::new(len - 8 - footer_len, footer_len), Purpose::Footer)
            .await?
    };
    let meta = FileMetadata::decode(&footer)?;
    meta.validate_ranges(len)?;
    Ok(meta)
}

/// Fetches one column chunk with a single range read and decodes all of its pages.
pub async fn read_column_chunk(
    source: &DataSource,
    chunk: &ColumnChunkMeta,
    leaf: &SchemaNode,
) -> Result<DecodedColumn, ParquetError> {
    let bytes = source.read_range(chunk.byte_range(), Purpose::ColumnChunk).await?;
    decode_chunk(&bytes, chunk, leaf)
}

/// Reads every leaf chunk under top-level field `field` (a node index) in row
/// group `row_group`, concurrently, and assembles the field's values.
pub async fn read_field(
    source: &DataSource,
    meta: &FileMetadata,
    row_group: usize,
    field: usize,
) -> Result<Vec<Value>, ParquetError> {
    let rg = &meta.row_groups[row_group];
    let leaves = meta.schema.leaves_under(field);
    let decoded = try_join_all(leaves.iter().map(|&l| async move {
        let col = read_column_chunk(source, &rg.columns[l], meta.schema.leaf(l)).await?;
        Ok::<_, ParquetError>((l, col))
    }))
    .await?;
    let columns: HashMap<usize, DecodedColumn> = decoded.into_iter().collect();
    let values = assemble_field(&meta.schema, field, &columns)?;
    if values.len() as i64 != rg.num_rows {
        return Err(ParquetError::LevelMismatch(format!(
            "row group {row_group} field {} assembled {} records, metadata says {}",
            meta.schema.node(field).name,
            values.len(),
            rg.num_rows
        )));
    }
    Ok(values)
}

/// An opened Parquet file: source plus decoded footer.
#[derive(Clone)]
pub struct ParquetFile {
    pub source: DataSource,
    pub metadata: Arc<FileMetadata>,
}

impl ParquetFile {
    pub async fn open(source: DataSource, tail_hint: u64) -> Result<Self, ParquetError> {
        let metadata = Arc::new(read_footer(&source, tail_hint).await?);
        Ok(Self { source, metadata })
    }

    /// Top-level field names in schema order.
    pub fn field_names(&self) -> Vec<String> {
        let schema = &self.metadata.schema;
        schema.top_level().iter().map(|&n| schema.node(n).name.clone()).collect()
    }

    /// Reads the named top-level fields (all when `None`) from every row group
    /// that survives `predicate`, returning rows with fields in the requested order.
    pub async fn read_rows(
        &self,
        fields: Option<&[&str]>,
        predicate: Option<&SimplePredicate>,
    ) -> Result<Vec<Vec<Value>>, ParquetError> {
        let schema = &self.metadata.schema;
        let nodes: Vec<usize> = match fields {
            None => schema.top_level().to_vec(),
            Some(names) => names
                .iter()
                .map(|n| {
                    schema
                        .top_level_index(n)
                        .map(|i| schema.top_level()[i])
                        .ok_or_else(|| ParquetError::UnknownColumn(n.to_string()))
                })
                .collect::<Result<_, _>>()?,
        };
        let groups = match predicate {
            Some(p) => prune_row_groups(&self.metadata, p)?,
            None => (0..self.metadata.row_groups.len()).collect(),
        };
        let mut rows = Vec::new();
        for g in groups {
            let cols = try_join_all(
                nodes
                    .iter()
                    .map(|&n| read_field(&self.source, &self.metadata, g, n)),
            )
            .await?;
            let n = self.metadata.row_groups[g].num_rows as usize;
            let mut iters: Vec<_> = cols.into_iter().map(Vec::into_iter).collect();
            for _ in 0..n {
                rows.push(iters.iter_mut().map(|i| i.next().unwrap_or(Value::Null)).collect());
            }
        }
        Ok(rows)
    }
}
