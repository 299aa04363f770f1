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

//! Avro object container files, limited to what Iceberg manifests use.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;

use bytes::Bytes;
use serde_json::Value as Json;

#[derive(Debug, thiserror::Error)]
pub enum AvroError {
    #[error("unsupported avro feature: {0}")]
    Unsupported(String),
    #[error("corrupt avro data: {0}")]
    Corrupt(String),
}

type Result<T> = std::result::Result<T, AvroError>;

fn corrupt<T>(msg: impl Into<String>) -> Result<T> {
    Err(AvroError::Corrupt(msg.into()))
}

#[derive(Debug, Clone)]
pub enum Schema {
    Null,
    Boolean,
    Int,
    Long,
    Float,
    Double,
    Bytes,
    String,
    Fixed(usize),
    Record(Arc<RecordSchema>),
    Array(Box<Schema>),
    Map(Box<Schema>),
    Union(Vec<Schema>),
}

#[derive(Debug)]
pub struct RecordSchema {
    pub name: String,
    pub fields: Vec<FieldSchema>,
}

#[derive(Debug)]
pub struct FieldSchema {
    pub name: String,
    pub field_id: Option<i32>,
    pub schema: Schema,
}

impl Schema {
    pub fn parse(json: &Json) -> Result<Schema> {
        SchemaParser::default().parse(json, None)
    }
}

#[derive(Default)]
struct SchemaParser {
    named: HashMap<String, Schema>,
}

impl SchemaParser {
    fn full_name(name: &str, namespace: Option<&str>) -> String {
        match namespace {
            Some(ns) if !name.contains('.') && !ns.is_empty() => format!("{ns}.{name}"),
            _ => name.to_string(),
        }
    }

    fn parse(&mut self, json: &Json, namespace: Option<&str>) -> Result<Schema> {
        match json {
            Json::String(name) => self.primitive(name, namespace),
            Json::Array(branches) => Ok(Schema::Union(
                branches
                    .iter()
                    .map(|b| self.parse(b, namespace))
                    .collect::<Result<_>>()?,
            )),
            Json::Object(obj) => {
                let ty = obj.get("type").ok_or(AvroError::Corrupt("schema without type".into()))?;
                let Json::String(ty) = ty else {
                    return self.parse(ty, namespace);
                };
                match ty.as_str() {
                    "record" | "error" => {
                        let name = obj.get("name").and_then(Json::as_str).unwrap_or("record");
                        let ns = obj.get("namespace").and_then(Json::as_str).or(namespace);
                        let full = Self::full_name(name, ns);
                        let Some(Json::Array(fields)) = obj.get("fields") else {
                            return corrupt(format!("record {name} without fields"));
                        };
                        let mut out = Vec::with_capacity(fields.len());
                        for f in fields {
                            let fname = f
                                .get("name")
                                .and_then(Json::as_str)
                                .ok_or(AvroError::Corrupt("field without name".into()))?;
                            let ftype = f.get("type").ok_or(AvroError::Corrupt("field without type".into()))?;
                            out.push(FieldSchema {
                                name: fname.to_string(),
                                field_id: f.get("field-id").and_then(Json::as_i64).map(|v| v as i32),
                                schema: self.parse(ftype, ns)?,
                            });
                        }
                        let schema = Schema::Record(Arc::new(RecordSchema {
                            name: full.clone(),
                            fields: out,
                        }));
                        self.named.insert(full, schema.clone());
                        Ok(schema)
                    }
                    "array" => {
                        let items = obj.get("items").ok_or(AvroError::Corrupt("array without items".into()))?;
                        Ok(Schema::Array(Box::new(self.parse(items, namespace)?)))
                    }
                    "map" => {
                        let values = obj.get("values").ok_or(AvroError::Corrupt("map without values".into()))?;
                        Ok(Schema::Map(Box::new(self.parse(values, namespace)?)))
                    }
                    "fixed" => {
                        let size = obj.get("size").and_then(Json::as_u64).ok_or(AvroError::Corrupt("fixed without size".into()))?;
                        let schema = Schema::Fixed(size as usize);
                        if let Some(name) = obj.get("name").and_then(Json::as_str) {
                            self.named.insert(Self::full_name(name, namespace), schema.clone());
                        }
                        Ok(schema)
                    }
                    "enum" => Err(AvroError::Unsupported("enum type".into())),
                    other => self.primitive(other, namespace),
                }
            }
            other => corrupt(format!("bad schema node {other}")),
        }
    }

    fn primitive(&self, name: &str, namespace: Option<&str>) -> Result<Schema> {
        Ok(match name {
            "null" => Schema::Null,
            "boolean" => Schema::Boolean,
            "int" => Schema::Int,
            "long" => Schema::Long,
            "float" => Schema::Float,
            "double" => Schema::Double,
            "bytes" => Schema::Bytes,
            "string" => Schema::String,
            other => match self
                .named
                .get(&Self::full_name(other, namespace))
                .or_else(|| self.named.get(other))
            {
                Some(s) => s.clone(),
                None => return Err(AvroError::Unsupported(format!("type {other}"))),
            },
        })
    }
}

/// A decoded Avro datum.
#[derive(Debug, Clone, PartialEq)]
pub enum AvroValue {
    Null,
    Boolean(bool),
    Int(i32),
    Long(i64),
    Float(f32),
    Double(f64),
    Bytes(Bytes),
    String(String),
    Record(Vec<(String, AvroValue)>),
    Array(Vec<AvroValue>),
    Map(Vec<(String, AvroValue)>),
}

impl AvroValue {
    pub fn field(&self, name: &str) -> Option<&AvroValue> {
        match self {
            AvroValue::Record(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            AvroValue::Int(v) => Some(*v as i64),
            AvroValue::Long(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AvroValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, AvroValue::Null)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return corrupt(format!("need {n} bytes at offset {}", self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn long(&mut self) -> Result<i64> {
        let mut v = 0u64;
        let mut shift = 0;
        loop {
            let b = self.take(1)?[0];
            if shift > 63 {
                return corrupt("varint overflow");
            }
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                break;
            }
            shift += 7;
        }
        Ok(((v >> 1) as i64) ^ -((v & 1) as i64))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.long()?;
        if n < 0 || n as usize > self.buf.len() - self.pos {
            return corrupt(format!("bad length {n}"));
        }
        Ok(n as usize)
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).or_else(|_| corrupt("invalid utf-8"))
    }

    /// Block count for arrays and maps; negative counts carry a byte size we ignore.
    fn block_count(&mut self) -> Result<usize> {
        let n = self.long()?;
        if n < 0 {
            self.long()?;
            Ok(n.unsigned_abs() as usize)
        } else {
            Ok(n as usize)
        }
    }

    fn value(&mut self, schema: &Schema) -> Result<AvroValue> {
        Ok(match schema {
            Schema::Null => AvroValue::Null,
            Schema::Boolean => AvroValue::Boolean(self.take(1)?[0] != 0),
            Schema::Int => AvroValue::Int(self.long()? as i32),
            Schema::Long => AvroValue::Long(self.long()?),
            Schema::Float => AvroValue::Float(f32::from_le_bytes(self.take(4)?.try_into().expect("4"))),
            Schema::Double => AvroValue::Double(f64::from_le_bytes(self.take(8)?.try_into().expect("8"))),
            Schema::Bytes => AvroValue::Bytes(Bytes::copy_from_slice(self.bytes()?)),
            Schema::Fixed(n) => AvroValue::Bytes(Bytes::copy_from_slice(self.take(*n)?)),
            Schema::String => AvroValue::String(self.string()?),
            Schema::Record(r) => AvroValue::Record(
                r.fields
                    .iter()
                    .map(|f| Ok((f.name.clone(), self.value(&f.schema)?)))
                    .collect::<Result<_>>()?,
            ),
            Schema::Array(items) => {
                let mut out = Vec::new();
                loop {
                    let n = self.block_count()?;
                    if n == 0 {
                        break;
                    }
                    for _ in 0..n {
                        out.push(self.value(items)?);
                    }
                }
                AvroValue::Array(out)
            }
            Schema::Map(values) => {
                let mut out = Vec::new();
                loop {
                    let n = self.block_count()?;
                    if n == 0 {
                        break;
                    }
                    for _ in 0..n {
                        let k = self.string()?;
                        out.push((k, self.value(values)?));
                    }
                }
                AvroValue::Map(out)
            }
            Schema::Union(branches) => {
                let idx = self.long()?;
                let branch = usize::try_from(idx)
                    .ok()
                    .and_then(|i| branches.get(i))
                    .ok_or(AvroError::Corrupt(format!("union branch {idx} out of range")))?;
                self.value(branch)?
            }
        })
    }
}

/// A decoded container file: header metadata, writer schema and records.
#[derive(Debug)]
pub struct ContainerFile {
    pub metadata: HashMap<String, Bytes>,
    pub schema: Schema,
    pub schema_json: Json,
    pub records: Vec<AvroValue>,
}

impl ContainerFile {
    pub fn metadata_str(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).and_then(|b| std::str::from_utf8(b).ok())
    }
}

const MAGIC: &[u8; 4] = b"Obj\x01";

pub fn read_container(buf: &[u8]) -> Result<ContainerFile> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4).ok() != Some(&MAGIC[..]) {
        return corrupt("missing avro magic");
    }
    let meta_schema = Schema::Map(Box::new(Schema::Bytes));
    let AvroValue::Map(entries) = c.value(&meta_schema)? else {
        unreachable!("map schema yields a map");
    };
    let metadata: HashMap<String, Bytes> = entries
        .into_iter()
        .map(|(k, v)| match v {
            AvroValue::Bytes(b) => (k, b),
            _ => unreachable!("bytes schema yields bytes"),
        })
        .collect();
    let sync: [u8; 16] = c.take(16)?.try_into().expect("16");
    let codec = metadata
        .get("avro.codec")
        .map(|b| String::from_utf8_lossy(b).into_owned())
        .unwrap_or_else(|| "null".into());
    if codec != "null" && codec != "deflate" {
        return Err(AvroError::Unsupported(format!("codec {codec}")));
    }
    let schema_json: Json = match metadata.get("avro.schema") {
        Some(b) => serde_json::from_slice(b).or_else(|e| corrupt(format!("schema json: {e}")))?,
        None => return corrupt("missing avro.schema"),
    };
    let schema = Schema::parse(&schema_json)?;
    let mut records = Vec::new();
    while c.pos < buf.len() {
        let count = c.long()?;
        let size = c.len()?;
        let block = c.take(size)?;
        let data = if codec == "deflate" {
            let mut out = Vec::new();
            flate2::read::DeflateDecoder::new(block)
                .read_to_end(&mut out)
                .or_else(|e| corrupt(format!("deflate: {e}")))?;
            out
        } else {
            block.to_vec()
        };
        let mut bc = Cursor { buf: &data, pos: 0 };
        for _ in 0..count {
            records.push(bc.value(&schema)?);
        }
        if c.take(16)? != sync {
            return corrupt("sync marker mismatch");
        }
    }
    Ok(ContainerFile {
        metadata,
        schema,
        schema_json,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn zigzag(v: i64, out: &mut Vec<u8>) {
        let mut u = ((v << 1) ^ (v >> 63)) as u64;
        loop {
            if u < 0x80 {
                out.push(u as u8);
                return;
            }
            out.push((u as u8 & 0x7f) | 0x80);
            u >>= 7;
        }
    }

    fn container(schema: &str, codec: &str, block: &[u8], count: i64) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        zigzag(2, &mut out);
        for (k, v) in [("avro.schema", schema), ("avro.codec", codec)] {
            zigzag(k.len() as i64, &mut out);
            out.extend_from_slice(k.as_bytes());
            zigzag(v.len() as i64, &mut out);
            out.extend_from_slice(v.as_bytes());
        }
        zigzag(0, &mut out);
        let sync = [7u8; 16];
        out.extend_from_slice(&sync);
        let body = if codec == "deflate" {
            let mut e = flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
            e.write_all(block).unwrap();
            e.finish().unwrap()
        } else {
            block.to_vec()
        };
        zigzag(count, &mut out);
        zigzag(body.len() as i64, &mut out);
        out.extend_from_slice(&body);
        out.extend_from_slice(&sync);
        out
    }

    const SCHEMA: &str = r#"{"type":"record","name":"r","fields":[
        {"name":"id","type":"long","field-id":1},
        {"name":"tag","type":["null","string"]},
        {"name":"xs","type":{"type":"array","items":"int"}}]}"#;

    fn record_bytes() -> Vec<u8> {
        let mut b = Vec::new();
        zigzag(-5, &mut b);
        zigzag(1, &mut b);
        zigzag(2, &mut b);
        b.extend_from_slice(b"hi");
        zigzag(2, &mut b);
        zigzag(3, &mut b);
        zigzag(4, &mut b);
        zigzag(0, &mut b);
        b
    }

    #[test]
    fn decodes_null_and_deflate_blocks() {
        for codec in ["null", "deflate"] {
            let file = read_container(&container(SCHEMA, codec, &record_bytes(), 1)).unwrap();
            assert_eq!(file.records.len(), 1);
            let r = &file.records[0];
            assert_eq!(r.field("id"), Some(&AvroValue::Long(-5)));
            assert_eq!(r.field("tag").and_then(AvroValue::as_str), Some("hi"));
            assert_eq!(
                r.field("xs"),
                Some(&AvroValue::Array(vec![AvroValue::Int(3), AvroValue::Int(4)]))
            );
        }
    }

    #[test]
    fn other_codecs_and_enums_are_unsupported() {
        let err = read_container(&container(SCHEMA, "snappy", &record_bytes(), 1)).unwrap_err();
        assert!(matches!(err, AvroError::Unsupported(_)));
        let enum_schema = r#"{"type":"enum","name":"e","symbols":["A"]}"#;
        let err = read_container(&container(enum_schema, "null", &[0], 1)).unwrap_err();
        assert!(matches!(err, AvroError::Unsupported(_)));
    }

    #[test]
    fn bad_sync_marker_is_corrupt() {
        let mut bytes = container(SCHEMA, "null", &record_bytes(), 1);
        let n = bytes.len();
        bytes[n - 1] ^= 0xff;
        assert!(matches!(read_container(&bytes), Err(AvroError::Corrupt(_))));
    }
}
