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

//! Parquet decoding over range reads: footer, pruning, pages and record assembly.

mod assemble;
mod compression;
mod encoding;
pub mod metadata;
mod page;
mod prune;
mod reader;
pub mod schema;
pub(crate) mod thrift;

pub use assemble::{assemble_field, assemble_records};
pub use metadata::{Codec, ColumnChunkMeta, FileMetadata, RowGroupMeta, Statistics};
pub use page::DecodedColumn;
pub use prune::{prune_row_groups, CompareOp, SimplePredicate};
pub use reader::{read_column_chunk, read_field, read_footer, ParquetFile};
pub use schema::{LogicalType, PhysicalType, Repetition, SchemaNode, SchemaTree, TimeUnit};

use crate::io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum ParquetError {
    #[error("not a parquet file: {0}")]
    NotParquet(String),
    #[error("corrupt footer: {0}")]
    FooterCorrupt(String),
    #[error("unsupported parquet feature: {0}")]
    UnsupportedFeature(String),
    #[error("unsupported encoding {encoding} in column {column}")]
    UnsupportedEncoding { column: String, encoding: String },
    #[error("unsupported compression codec {codec} in column {column}")]
    UnsupportedCodec { column: String, codec: String },
    #[error("corrupt page in column {column}: {message}")]
    PageCorrupt { column: String, message: String },
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Encoding ids from the format's `Encoding` enum.
pub(crate) fn encoding_name(id: i32) -> String {
    match id {
        0 => "PLAIN".into(),
        2 => "PLAIN_DICTIONARY".into(),
        3 => "RLE".into(),
        4 => "BIT_PACKED".into(),
        5 => "DELTA_BINARY_PACKED".into(),
        6 => "DELTA_LENGTH_BYTE_ARRAY".into(),
        7 => "DELTA_BYTE_ARRAY".into(),
        8 => "RLE_DICTIONARY".into(),
        9 => "BYTE_STREAM_SPLIT".into(),
        other => format!("encoding #{other}"),
    }
}
