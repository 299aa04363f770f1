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

//! Page headers and column chunk decoding.

use bytes::Bytes;

use super::compression::decompress;
use super::encoding::{decode_levels, decode_plain, read_prefixed_levels, RleDecoder};
use super::metadata::{Codec, ColumnChunkMeta};
use super::schema::{LeafConverter, PhysicalType, SchemaNode};
use super::thrift::{field_bool, CompactReader, FieldType, Result as ThriftResult};
use super::{encoding_name, ParquetError};
use crate::value::Value;

/// Levels and non-null values of one leaf column (one row group).
#[derive(Debug, Clone, Default)]
pub struct DecodedColumn {
    pub definition_levels: Vec<i16>,
    pub repetition_levels: Vec<i16>,
    /// Values for entries whose definition level equals the maximum; nulls are not stored.
    pub values: Vec<Value>,
    pub max_definition_level: i16,
    pub max_repetition_level: i16,
}

impl DecodedColumn {
    /// Number of level entries (equal to value count for required flat columns).
    pub fn len(&self) -> usize {
        self.definition_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.definition_levels.is_empty()
    }

    /// Number of records, i.e. entries starting a new top-level row.
    pub fn num_records(&self) -> usize {
        if self.max_repetition_level == 0 {
            self.len()
        } else {
            self.repetition_levels.iter().filter(|r| **r == 0).count()
        }
    }

    pub fn check_invariant(&self) -> bool {
        let defined = self
            .definition_levels
            .iter()
            .filter(|d| **d == self.max_definition_level)
            .count();
        defined == self.values.len() && self.definition_levels.len() == self.repetition_levels.len()
    }
}

#[derive(Debug, Default)]
struct PageHeader {
    page_type: i32,
    uncompressed_size: i32,
    compressed_size: i32,
    data_v1: Option<DataPageV1>,
    data_v2: Option<DataPageV2>,
    dictionary: Option<DictionaryPage>,
}

#[derive(Debug, Default)]
struct DataPageV1 {
    num_values: i32,
    encoding: i32,
    def_encoding: i32,
    rep_encoding: i32,
}

#[derive(Debug)]
struct DataPageV2 {
    num_values: i32,
    num_nulls: i32,
    encoding: i32,
    def_length: i32,
    rep_length: i32,
    is_compressed: bool,
}

#[derive(Debug, Default)]
struct DictionaryPage {
    num_values: i32,
    encoding: i32,
}

fn read_page_header(r: &mut CompactReader) -> ThriftResult<PageHeader> {
    let mut h = PageHeader::default();
    r.struct_begin();
    while let Some((id, ty)) = r.field()? {
        match (id, ty) {
            (1, FieldType::I32) => h.page_type = r.i32()?,
            (2, FieldType::I32) => h.uncompressed_size = r.i32()?,
            (3, FieldType::I32) => h.compressed_size = r.i32()?,
            (5, FieldType::Struct) => {
                let mut p = DataPageV1::default();
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, FieldType::I32) => p.num_values = r.i32()?,
                        (2, FieldType::I32) => p.encoding = r.i32()?,
                        (3, FieldType::I32) => p.def_encoding = r.i32()?,
                        (4, FieldType::I32) => p.rep_encoding = r.i32()?,
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                h.data_v1 = Some(p);
            }
            (7, FieldType::Struct) => {
                let mut p = DictionaryPage::default();
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, FieldType::I32) => p.num_values = r.i32()?,
                        (2, FieldType::I32) => p.encoding = r.i32()?,
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                h.dictionary = Some(p);
            }
            (8, FieldType::Struct) => {
                let mut p = DataPageV2 {
                    num_values: 0,
                    num_nulls: 0,
                    encoding: 0,
                    def_length: 0,
                    rep_length: 0,
                    is_compressed: true,
                };
                r.struct_begin();
                while let Some((fid, fty)) = r.field()? {
                    match (fid, fty) {
                        (1, FieldType::I32) => p.num_values = r.i32()?,
                        (2, FieldType::I32) => p.num_nulls = r.i32()?,
                        (4, FieldType::I32) => p.encoding = r.i32()?,
                        (5, FieldType::I32) => p.def_length = r.i32()?,
                        (6, FieldType::I32) => p.rep_length = r.i32()?,
                        (7, t @ (FieldType::BoolTrue | FieldType::BoolFalse)) => {
                            p.is_compressed = field_bool(t)
                        }
                        _ => r.skip(fty)?,
                    }
                }
                r.struct_end();
                h.data_v2 = Some(p);
            }
            _ => r.skip(ty)?,
        }
    }
    r.struct_end();
    Ok(h)
}

const PLAIN: i32 = 0;
const PLAIN_DICTIONARY: i32 = 2;
const RLE: i32 = 3;
const RLE_DICTIONARY: i32 = 8;

struct ChunkDecoder<'a> {
    chunk: &'a ColumnChunkMeta,
    leaf: &'a SchemaNode,
    conv: LeafConverter,
    column: String,
    dictionary: Option<Vec<Value>>,
    out: DecodedColumn,
}

impl ChunkDecoder<'_> {
    fn corrupt(&self, message: impl Into<String>) -> ParquetError {
        ParquetError::PageCorrupt {
            column: self.column.clone(),
            message: message.into(),
        }
    }

    fn unsupported_encoding(&self, id: i32) -> ParquetError {
        ParquetError::UnsupportedEncoding {
            column: self.column.clone(),
            encoding: encoding_name(id),
        }
    }

    fn decompress(&self, body: &[u8], expected: i32) -> Result<Bytes, ParquetError> {
        if expected < 0 {
            return Err(self.corrupt("negative uncompressed size"));
        }
        decompress(self.chunk.codec, body, expected as usize)
            .map(Bytes::from)
            .map_err(|m| self.corrupt(m))
    }

    fn dictionary_page(&mut self, h: &PageHeader, body: &[u8]) -> Result<(), ParquetError> {
        let d = h.dictionary.as_ref().ok_or_else(|| self.corrupt("dictionary page without header"))?;
        if d.encoding != PLAIN && d.encoding != PLAIN_DICTIONARY {
            return Err(self.unsupported_encoding(d.encoding));
        }
        if self.dictionary.is_some() {
            return Err(self.corrupt("second dictionary page in chunk"));
        }
        let data = self.decompress(body, h.uncompressed_size)?;
        let n = usize::try_from(d.num_values).map_err(|_| self.corrupt("negative dictionary size"))?;
        let mut values = Vec::with_capacity(n);
        decode_plain(&data, &self.conv, n, &mut values).map_err(|m| self.corrupt(m))?;
        self.dictionary = Some(values);
        Ok(())
    }

    fn data_page_v1(&mut self, h: &PageHeader, body: &[u8]) -> Result<(), ParquetError> {
        let p = h.data_v1.as_ref().ok_or_else(|| self.corrupt("data page without header"))?;
        let n = usize::try_from(p.num_values).map_err(|_| self.corrupt("negative value count"))?;
        let data = self.decompress(body, h.uncompressed_size)?;
        let mut pos = 0;
        let (max_rep, max_def) = (self.leaf.max_repetition_level, self.leaf.max_definition_level);
        let reps = if max_rep > 0 {
            if p.rep_encoding != RLE {
                return Err(self.unsupported_encoding(p.rep_encoding));
            }
            let (levels, used) =
                read_prefixed_levels(&data[pos..], max_rep, n).map_err(|m| self.corrupt(m))?;
            pos += used;
            levels
        } else {
            vec![0; n]
        };
        let defs = if max_def > 0 {
            if p.def_encoding != RLE {
                return Err(self.unsupported_encoding(p.def_encoding));
            }
            let (levels, used) =
                read_prefixed_levels(&data[pos..], max_def, n).map_err(|m| self.corrupt(m))?;
            pos += used;
            levels
        } else {
            vec![0; n]
        };
        let present = defs.iter().filter(|d| **d == max_def).count();
        self.values(p.encoding, data.slice(pos..), present)?;
        self.out.repetition_levels.extend(reps);
        self.out.definition_levels.extend(defs);
        Ok(())
    }

    fn data_page_v2(&mut self, h: &PageHeader, body: &[u8]) -> Result<(), ParquetError> {
        let p = h.data_v2.as_ref().ok_or_else(|| self.corrupt("data page v2 without header"))?;
        let n = usize::try_from(p.num_values).map_err(|_| self.corrupt("negative value count"))?;
        let (rep_len, def_len) = (p.rep_length.max(0) as usize, p.def_length.max(0) as usize);
        if rep_len + def_len > body.len() {
            return Err(self.corrupt("level sections exceed page"));
        }
        let (max_rep, max_def) = (self.leaf.max_repetition_level, self.leaf.max_definition_level);
        let reps = if max_rep > 0 {
            decode_levels(&body[..rep_len], max_rep, n).map_err(|m| self.corrupt(m))?
        } else {
            vec![0; n]
        };
        let defs = if max_def > 0 {
            decode_levels(&body[rep_len..rep_len + def_len], max_def, n).map_err(|m| self.corrupt(m))?
        } else {
            vec![0; n]
        };
        let rest = &body[rep_len + def_len..];
        let data = if p.is_compressed && self.chunk.codec != Codec::Uncompressed {
            let expected = h.uncompressed_size - (rep_len + def_len) as i32;
            self.decompress(rest, expected)?
        } else {
            Bytes::copy_from_slice(rest)
        };
        let present = defs.iter().filter(|d| **d == max_def).count();
        if p.num_nulls >= 0 && max_rep == 0 && present + p.num_nulls as usize != n {
            return Err(self.corrupt("null count disagrees with definition levels"));
        }
        self.values(p.encoding, data, present)?;
        self.out.repetition_levels.extend(reps);
        self.out.definition_levels.extend(defs);
        Ok(())
    }

    fn values(&mut self, encoding: i32, data: Bytes, n: usize) -> Result<(), ParquetError> {
        match encoding {
            PLAIN => decode_plain(&data, &self.conv, n, &mut self.out.values).map_err(|m| self.corrupt(m)),
            RLE if self.conv.physical == PhysicalType::Boolean => {
                // Boolean RLE values carry a 4-byte length prefix.
                let body = data.get(4..).ok_or_else(|| self.corrupt("truncated boolean RLE"))?;
                let mut raw = Vec::with_capacity(n);
                RleDecoder::new(body, 1).decode(n, &mut raw).map_err(|m| self.corrupt(m))?;
                self.out.values.extend(raw.into_iter().map(|b| Value::Boolean(b != 0)));
                Ok(())
            }
            PLAIN_DICTIONARY | RLE_DICTIONARY => {
                let Some(dict) = self.dictionary.as_ref() else {
                    return Err(self.corrupt("dictionary-encoded page before any dictionary page"));
                };
                if n == 0 {
                    return Ok(());
                }
                let width = *data.first().ok_or_else(|| self.corrupt("missing index bit width"))? as u32;
                let mut idx = Vec::with_capacity(n);
                RleDecoder::new(&data[1..], width)
                    .decode(n, &mut idx)
                    .map_err(|m| self.corrupt(m))?;
                for i in idx {
                    let v = dict
                        .get(i as usize)
                        .ok_or_else(|| self.corrupt(format!("dictionary index {i} out of range")))?;
                    self.out.values.push(v.clone());
                }
                Ok(())
            }
            other => Err(self.unsupported_encoding(other)),
        }
    }
}

/// Decodes every page in a column chunk's bytes.
pub(crate) fn decode_chunk(
    bytes: &Bytes,
    chunk: &ColumnChunkMeta,
    leaf: &SchemaNode,
) -> Result<DecodedColumn, ParquetError> {
    let column = chunk.path.join(".");
    if let Codec::Unsupported(_) = chunk.codec {
        return Err(ParquetError::UnsupportedCodec {
            column,
            codec: chunk.codec.name().to_string(),
        });
    }
    let mut dec = ChunkDecoder {
        chunk,
        leaf,
        conv: LeafConverter::for_leaf(leaf),
        column,
        dictionary: None,
        out: DecodedColumn {
            max_definition_level: leaf.max_definition_level,
            max_repetition_level: leaf.max_repetition_level,
            ..Default::default()
        },
    };
    let expected = usize::try_from(chunk.num_values).unwrap_or(0);
    let mut pos = 0usize;
    while pos < bytes.len() && dec.out.len() < expected {
        let mut r = CompactReader::new(&bytes[pos..]);
        let header = read_page_header(&mut r).map_err(|e| dec.corrupt(e.to_string()))?;
        let start = pos + r.position();
        let size = usize::try_from(header.compressed_size).map_err(|_| dec.corrupt("negative page size"))?;
        let end = start + size;
        if end > bytes.len() {
            return Err(dec.corrupt(format!("page of {size} bytes runs past chunk end")));
        }
        let body = &bytes[start..end];
        match header.page_type {
            0 => dec.data_page_v1(&header, body)?,
            2 => dec.dictionary_page(&header, body)?,
            3 => dec.data_page_v2(&header, body)?,
            // Index pages carry nothing we need.
            _ => {}
        }
        pos = end;
    }
    if dec.out.len() != expected {
        return Err(dec.corrupt(format!(
            "decoded {} level entries, metadata says {expected}",
            dec.out.len()
        )));
    }
    if !dec.out.check_invariant() {
        return Err(dec.corrupt("value count disagrees with definition levels"));
    }
    Ok(dec.out)
}
