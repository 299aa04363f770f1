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

//! Footer metadata decoding.

use bytes::Bytes;

use super::schema::{
    LeafConverter, LogicalType, PhysicalType, RawSchemaElement, SchemaTree, TimeUnit,
};
use super::thrift::{field_bool, CompactReader, FieldType, Result as ThriftResult};
use super::ParquetError;
use crate::io::ByteRange;
use crate::value::{key_cmp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codec {
    Uncompressed,
    Snappy,
    Gzip,
    Zstd,
    /// Known to the format but not decoded here (LZO, BROTLI, LZ4, LZ4_RAW, ...).
    Unsupported(i32),
}

impl Codec {
    fn from_thrift(v: i32) -> Self {
        match v {
            0 => Codec::Uncompressed,
            1 => Codec::Snappy,
            2 => Codec::Gzip,
            6 => Codec::Zstd,
            other => Codec::Unsupported(other),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Codec::Uncompressed => "UNCOMPRESSED",
            Codec::Snappy => "SNAPPY",
            Codec::Gzip => "GZIP",
            Codec::Zstd => "ZSTD",
            Codec::Unsupported(3) => "LZO",
            Codec::Unsupported(4) => "BROTLI",
            Codec::Unsupported(5) => "LZ4",
            Codec::Unsupported(7) => "LZ4_RAW",
            Codec::Unsupported(_) => "UNKNOWN",
        }
    }
}

/// Column chunk statistics, converted into the leaf's logical value domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistics {
    pub min: Option<Value>,
    pub max: Option<Value>,
    pub null_count: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct ColumnChunkMeta {
    pub column: usize,
    pub path: Vec<String>,
    pub physical: PhysicalType,
    pub codec: Codec,
    pub encodings: Vec<i32>,
    pub num_values: i64,
    pub total_compressed_size: i64,
    pub total_uncompressed_size: i64,
    pub data_page_offset: i64,
    pub dictionary_page_offset: Option<i64>,
    pub statistics: Option<Statistics>,
}

impl ColumnChunkMeta {
    /// Bytes covering the dictionary page (if any) and all data pages.
    pub fn byte_range(&self) -> ByteRange {
        let start = match self.dictionary_page_offset {
            Some(d) if d > 0 && d < self.data_page_offset => d,
            _ => self.data_page_offset,
        };
        ByteRange::new(start as u64, self.total_compressed_size as u64)
    }
}

#[derive(Debug, Clone)]
pub struct RowGroupMeta {
    pub num_rows: i64,
    pub columns: Vec<ColumnChunkMeta>,
}

#[derive(Debug, Clone)]
pub struct FileMetadata {
    pub num_rows: i64,
    pub schema: SchemaTree,
    pub row_groups: Vec<RowGroupMeta>,
    pub created_by: Option<String>,
    pub key_value: Vec<(String, Option<String>)>,
}

impl FileMetadata {
    /// Decodes a thrift `FileMetaData` struct.
    pub fn decode(buf: &[u8]) -> Result<Self, ParquetError> {
        let mut r = CompactReader::new(buf);
        let raw = read_file_metadata(&mut r).map_err(|e| ParquetError::FooterCorrupt(e.to_string()))?;
        if raw.encrypted {
            return Err(ParquetError::UnsupportedFeature(
                "encrypted columns (plaintext footer with encryption algorithm)".into(),
            ));
        }
        let schema = SchemaTree::from_elements(&raw.schema)?;
        let mut row_groups = Vec::with_capacity(raw.row_groups.len());
        for rg in raw.row_groups {
            if rg.columns.len() != schema.num_columns() {
                return Err(ParquetError::FooterCorrupt(format!(
                    "row group has {} column chunks, schema has {} leaves",
                    rg.columns.len(),
                    schema.num_columns()
                )));
            }
            let mut columns = Vec::with_capacity(rg.columns.len());
            for (i, cc) in rg.columns.into_iter().enumerate() {
                let Some(md) = cc.meta else {
                    return Err(ParquetError::FooterCorrupt(format!("column chunk {i} lacks metadata")));
                };
                let leaf = schema.leaf(i);
                let physical = leaf.physical.expect("leaf");
                let converter = LeafConverter::for_leaf(leaf);
                let statistics = md.statistics.map(|s| s.convert(&converter, &leaf.logical));
                columns.push(ColumnChunkMeta {
                    column: i,
                    path: if md.path.is_empty() { leaf.path.clone() } else { md.path },
                    physical,
                    codec: Codec::from_thrift(md.codec),
                    encodings: md.encodings,
                    num_values: md.num_values,
                    total_compressed_size: md.total_compressed_size,
                    total_uncompressed_size: md.total_uncompressed_size,
                    data_page_offset: md.data_page_offset,
                    dictionary_page_offset: md.dictionary_page_offset,
                    statistics,
                });
            }
            row_groups.push(RowGroupMeta {
                num_rows: rg.num_rows,
                columns,
            });
        }
        let sum: i64 = row_groups.iter().map(|g| g.num_rows).sum();
        if sum != raw.num_rows {
            return Err(ParquetError::FooterCorrupt(format!(
                "num_rows {} disagrees with row group total {sum}",
                raw.num_rows
            )));
        }
        Ok(FileMetadata {
            num_rows: raw.num_rows,
            schema,
            row_groups,
            created_by: raw.created_by,
            key_value: raw.key_value,
        })
    }

    /// Checks every chunk's byte range against the file length.
    pub(crate) fn validate_ranges(&self, file_length: u64) -> Result<(), ParquetError> {
        for (g, rg) in self.row_groups.iter().enumerate() {
            for c in &rg.columns {
                let r = c.byte_range();
                if c.total_compressed_size <= 0 || r.end() > file_length {
                    return Err(ParquetError::FooterCorrupt(format!(
                        "row group {g} column {} range {}+{} outside file of {file_length} bytes",
                        c.path.join("."),
                        r.offset,
                        r.length
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct RawFileMetadata {
    schema: Vec<RawSchemaElement>,
    num_rows: i64,
    row_groups: Vec<RawRowGroup>,
    created_by: Option<String>,
    key_value: Vec<(String, Option<String>)>,
    encrypted: bool,
}

#[derive(Default)]
struct RawRowGroup {
    columns: Vec<RawColumnChunk>,
    num_rows: i64,
}

#[derive(Default)]
struct RawColumnChunk {
    meta: Option<RawColumnMeta>,
}

#[derive(Default)]
struct RawColumnMeta {
    encodings: Vec<i32>,
    path: Vec<String>,
    codec: i32,
    num_values: i64,
    total_uncompressed_size: i64,
    total_compressed_size: i64,
    data_page_offset: i64,
    dictionary_page_offset: Option<i64>,
    statistics: Option<RawStatistics>,
}

#[derive(Default, Debug, Clone)]
pub(crate) struct RawStatistics {
    max_legacy: Option<Bytes>,
    min_legacy: Option<Bytes>,
    null_count: Option<i64>,
    max_value: Option<Bytes>,
    min_value: Option<Bytes>,
}

impl RawStatistics {
    fn convert(self, conv: &LeafConverter, logical: &LogicalType) -> Statistics {
        // Legacy min/max used signed byte ordering; only trust them for numeric leaves.
        let legacy_ok = !matches!(
            conv.physical,
            PhysicalType::ByteArray | PhysicalType::FixedLenByteArray(_) | PhysicalType::Int96
        ) && !matches!(logical, LogicalType::Integer { signed: false, .. });
        let (min_raw, max_raw) = match (self.min_value, self.max_value) {
            (Some(lo), Some(hi)) => (Some(lo), Some(hi)),
            _ if legacy_ok => (self.min_legacy, self.max_legacy),
            _ => (None, None),
        };
        let decode = |raw: Option<Bytes>| raw.and_then(|b| stat_value(conv, logical, b));
        let (min, max) = (decode(min_raw), decode(max_raw));
        // An inverted interval means the ordering is not one we understand; drop it.
        let (min, max) = match (&min, &max) {
            (Some(lo), Some(hi)) if key_cmp(lo, hi) == std::cmp::Ordering::Greater => (None, None),
            _ => (min, max),
        };
        Statistics {
            min,
            max,
            null_count: self.null_count,
        }
    }
}

fn stat_value(conv: &LeafConverter, logical: &LogicalType, b: Bytes) -> Option<Value> {
    if logical.is_uninterpreted() {
        return None;
    }
    Some(match conv.physical {
        PhysicalType::Boolean => Value::Boolean(*b.first()? != 0),
        PhysicalType::Int32 => conv.int32(i32::from_le_bytes(b.get(..4)?.try_into().ok()?)),
        PhysicalType::Int64 => {
            if matches!(logical, LogicalType::Integer { signed: false, bits: 64 }) {
                return None;
            }
            conv.int64(i64::from_le_bytes(b.get(..8)?.try_into().ok()?))
        }
        PhysicalType::Float => {
            let v = f32::from_le_bytes(b.get(..4)?.try_into().ok()?);
            if v.is_nan() {
                return None;
            }
            Value::Float(v as f64)
        }
        PhysicalType::Double => {
            let v = f64::from_le_bytes(b.get(..8)?.try_into().ok()?);
            if v.is_nan() {
                return None;
            }
            Value::Float(v)
        }
        PhysicalType::ByteArray | PhysicalType::FixedLenByteArray(_) => conv.bytes(b),
        PhysicalType::Int96 => return None,
    })
}

fn read_file_metadata(r: &mut CompactReader) -> ThriftResult<RawFileMetadata> {
    let mut out = RawFileMetadata::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (2, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.schema.push(read_schema_element(r)?);
                }
            }
            (3, FieldType::I64) => out.num_rows = r.i64()?,
            (4, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.row_groups.push(read_row_group(r)?);
                }
            }
            (5, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.key_value.push(read_key_value(r)?);
                }
            }
            (6, FieldType::Binary) => out.created_by = Some(r.string()?),
            (8, _) => {
                out.encrypted = true;
                r.skip(ty)?;
            }
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(out)
}

fn read_key_value(r: &mut CompactReader) -> ThriftResult<(String, Option<String>)> {
    let (mut k, mut v) = (String::new(), None);
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (1, FieldType::Binary) => k = r.string()?,
            (2, FieldType::Binary) => v = Some(String::from_utf8_lossy(r.binary()?).into_owned()),
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok((k, v))
}

fn read_schema_element(r: &mut CompactReader) -> ThriftResult<RawSchemaElement> {
    let mut el = RawSchemaElement::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (1, FieldType::I32) => el.physical = Some(r.i32()?),
            (2, FieldType::I32) => el.type_length = Some(r.i32()?),
            (3, FieldType::I32) => el.repetition = Some(r.i32()?),
            (4, FieldType::Binary) => el.name = r.string()?,
            (5, FieldType::I32) => el.num_children = Some(r.i32()?),
            (6, FieldType::I32) => el.converted = Some(r.i32()?),
            (7, FieldType::I32) => el.scale = Some(r.i32()?),
            (8, FieldType::I32) => el.precision = Some(r.i32()?),
            (9, FieldType::I32) => el.field_id = Some(r.i32()?),
            (10, FieldType::Struct) => el.logical = Some(read_logical_type(r)?),
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(el)
}

fn read_logical_type(r: &mut CompactReader) -> ThriftResult<LogicalType> {
    let mut out = LogicalType::Other("empty logical type".into());
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        out = match (id, ty) {
            (1, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::String
            }
            (2, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::Map
            }
            (3, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::List
            }
            (4, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::Enum
            }
            (5, FieldType::Struct) => {
                let (mut scale, mut precision) = (0, 0);
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, FieldType::I32) => scale = r.i32()?,
                        (2, FieldType::I32) => precision = r.i32()?,
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                LogicalType::Decimal {
                    scale: scale.max(0) as u32,
                    precision: precision.max(0) as u32,
                }
            }
            (6, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::Date
            }
            (8, FieldType::Struct) => {
                let (mut utc, mut unit) = (false, TimeUnit::Micros);
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, t @ (FieldType::BoolTrue | FieldType::BoolFalse)) => utc = field_bool(t),
                        (2, FieldType::Struct) => unit = read_time_unit(r)?,
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                LogicalType::Timestamp { unit, utc }
            }
            (10, FieldType::Struct) => {
                let (mut bits, mut signed) = (32u8, true);
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, FieldType::Byte) => bits = r.byte()?,
                        (2, t @ (FieldType::BoolTrue | FieldType::BoolFalse)) => signed = field_bool(t),
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                LogicalType::Integer { bits, signed }
            }
            (12, FieldType::Struct) => {
                r.skip(ty)?;
                LogicalType::Json
            }
            (other, _) => {
                r.skip(ty)?;
                LogicalType::Other(format!("logical type {other}"))
            }
        };
    }
    r.struct_end();
    Ok(out)
}

fn read_time_unit(r: &mut CompactReader) -> ThriftResult<TimeUnit> {
    let mut unit = TimeUnit::Micros;
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        unit = match id {
            1 => TimeUnit::Millis,
            2 => TimeUnit::Micros,
            _ => TimeUnit::Nanos,
        };
        r.skip(ty)?;
    }
    r.struct_end();
    Ok(unit)
}

fn read_row_group(r: &mut CompactReader) -> ThriftResult<RawRowGroup> {
    let mut out = RawRowGroup::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (1, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.columns.push(read_column_chunk(r)?);
                }
            }
            (3, FieldType::I64) => out.num_rows = r.i64()?,
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(out)
}

fn read_column_chunk(r: &mut CompactReader) -> ThriftResult<RawColumnChunk> {
    let mut out = RawColumnChunk::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (3, FieldType::Struct) => out.meta = Some(read_column_meta(r)?),
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(out)
}

fn read_column_meta(r: &mut CompactReader) -> ThriftResult<RawColumnMeta> {
    let mut out = RawColumnMeta::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (2, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.encodings.push(r.i32()?);
                }
            }
            (3, FieldType::List) => {
                let (_, n) = r.list_begin()?;
                for _ in 0..n {
                    out.path.push(r.string()?);
                }
            }
            (4, FieldType::I32) => out.codec = r.i32()?,
            (5, FieldType::I64) => out.num_values = r.i64()?,
            (6, FieldType::I64) => out.total_uncompressed_size = r.i64()?,
            (7, FieldType::I64) => out.total_compressed_size = r.i64()?,
            (9, FieldType::I64) => out.data_page_offset = r.i64()?,
            (11, FieldType::I64) => out.dictionary_page_offset = Some(r.i64()?),
            (12, FieldType::Struct) => out.statistics = Some(read_statistics(r)?),
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(out)
}

pub(crate) fn read_statistics(r: &mut CompactReader) -> ThriftResult<RawStatistics> {
    let mut out = RawStatistics::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (1, FieldType::Binary) => out.max_legacy = Some(Bytes::copy_from_slice(r.binary()?)),
            (2, FieldType::Binary) => out.min_legacy = Some(Bytes::copy_from_slice(r.binary()?)),
            (3, FieldType::I64) => out.null_count = Some(r.i64()?),
            (5, FieldType::Binary) => out.max_value = Some(Bytes::copy_from_slice(r.binary()?)),
            (6, FieldType::Binary) => out.min_value = Some(Bytes::copy_from_slice(r.binary()?)),
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(out)
}
