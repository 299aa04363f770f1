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

//! Thrift compact protocol reader, just enough for Parquet footers and page headers.

#[derive(Debug, thiserror::Error)]
#[error("thrift decode error at byte {position}: {message}")]
pub struct ThriftError {
    pub position: usize,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, ThriftError>;

/// Compact-protocol wire types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    BoolTrue,
    BoolFalse,
    Byte,
    I16,
    I32,
    I64,
    Double,
    Binary,
    List,
    Set,
    Map,
    Struct,
}

impl FieldType {
    fn from_nibble(n: u8) -> Option<Self> {
        Some(match n {
            1 => FieldType::BoolTrue,
            2 => FieldType::BoolFalse,
            3 => FieldType::Byte,
            4 => FieldType::I16,
            5 => FieldType::I32,
            6 => FieldType::I64,
            7 => FieldType::Double,
            8 => FieldType::Binary,
            9 => FieldType::List,
            10 => FieldType::Set,
            11 => FieldType::Map,
            12 => FieldType::Struct,
            _ => return None,
        })
    }
}

pub struct CompactReader<'a> {
    buf: &'a [u8],
    pos: usize,
    last_field: Vec<i16>,
}

impl<'a> CompactReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self {
            buf,
            pos: 0,
            last_field: Vec::new(),
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(ThriftError {
            position: self.pos,
            message: message.into(),
        })
    }

    pub fn byte(&mut self) -> Result<u8> {
        match self.buf.get(self.pos) {
            Some(b) => {
                self.pos += 1;
                Ok(*b)
            }
            None => self.err("unexpected end of input"),
        }
    }

    pub fn varint(&mut self) -> Result<u64> {
        let mut result = 0u64;
        let mut shift = 0;
        loop {
            let b = self.byte()?;
            if shift >= 64 {
                return self.err("varint overflow");
            }
            result |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(result);
            }
            shift += 7;
        }
    }

    fn zigzag(&mut self) -> Result<i64> {
        let v = self.varint()?;
        Ok(((v >> 1) as i64) ^ -((v & 1) as i64))
    }

    pub fn i16(&mut self) -> Result<i16> {
        Ok(self.zigzag()? as i16)
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(self.zigzag()? as i32)
    }

    pub fn i64(&mut self) -> Result<i64> {
        self.zigzag()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return self.err(format!("need {n} bytes, {} left", self.buf.len() - self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn binary(&mut self) -> Result<&'a [u8]> {
        let len = self.varint()? as usize;
        self.take(len)
    }

    pub fn string(&mut self) -> Result<String> {
        let bytes = self.binary()?;
        match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_string()),
            Err(_) => self.err("invalid utf-8 string"),
        }
    }

    pub fn struct_begin(&mut self) {
        self.last_field.push(0);
    }

    pub fn struct_end(&mut self) {
        self.last_field.pop();
    }

    /// Next field header inside the current struct, or `None` at STOP.
    pub fn field(&mut self) -> Result<Option<(i16, FieldType)>> {
        let header = self.byte()?;
        if header == 0 {
            return Ok(None);
        }
        let ty = match FieldType::from_nibble(header & 0x0f) {
            Some(t) => t,
            None => return self.err(format!("bad field type {}", header & 0x0f)),
        };
        let delta = (header >> 4) as i16;
        let id = if delta == 0 {
            self.i16()?
        } else {
            self.last_field.last().copied().unwrap_or(0) + delta
        };
        if let Some(last) = self.last_field.last_mut() {
            *last = id;
        }
        Ok(Some((id, ty)))
    }

    /// List or set header: (element type, count).
    pub fn list_begin(&mut self) -> Result<(FieldType, usize)> {
        let header = self.byte()?;
        let size = match header >> 4 {
            15 => self.varint()? as usize,
            n => n as usize,
        };
        let ty = match FieldType::from_nibble(header & 0x0f) {
            Some(t) => t,
            None => return self.err(format!("bad list element type {}", header & 0x0f)),
        };
        if size > self.buf.len() {
            return self.err(format!("implausible list size {size}"));
        }
        Ok((ty, size))
    }

    pub fn skip(&mut self, ty: FieldType) -> Result<()> {
        self.skip_depth(ty, 0)
    }

    fn skip_depth(&mut self, ty: FieldType, depth: usize) -> Result<()> {
        if depth > 64 {
            return self.err("nesting too deep");
        }
        match ty {
            FieldType::BoolTrue | FieldType::BoolFalse => {}
            FieldType::Byte => {
                self.byte()?;
            }
            FieldType::I16 | FieldType::I32 | FieldType::I64 => {
                self.varint()?;
            }
            FieldType::Double => {
                self.take(8)?;
            }
            FieldType::Binary => {
                self.binary()?;
            }
            FieldType::List | FieldType::Set => {
                let (elem, n) = self.list_begin()?;
                for _ in 0..n {
                    if matches!(elem, FieldType::BoolTrue | FieldType::BoolFalse) {
                        self.byte()?;
                    } else {
                        self.skip_depth(elem, depth + 1)?;
                    }
                }
            }
            FieldType::Map => {
                let n = self.varint()? as usize;
                if n > 0 {
                    let kv = self.byte()?;
                    let k = FieldType::from_nibble(kv >> 4);
                    let v = FieldType::from_nibble(kv & 0x0f);
                    let (Some(k), Some(v)) = (k, v) else {
                        return self.err("bad map types");
                    };
                    for _ in 0..n {
                        self.skip_depth(k, depth + 1)?;
                        self.skip_depth(v, depth + 1)?;
                    }
                }
            }
            FieldType::Struct => {
                self.struct_begin();
                while let Some((_, t)) = self.field()? {
                    self.skip_depth(t, depth + 1)?;
                }
                self.struct_end();
            }
        }
        Ok(())
    }
}

/// Field-header booleans carry their value in the type nibble.
pub fn field_bool(ty: FieldType) -> bool {
    ty == FieldType::BoolTrue
}

#[cfg(test)]
pub(crate) mod writer {
    //! Minimal compact-protocol writer used only to build test inputs.

    pub struct CompactWriter {
        pub buf: Vec<u8>,
        last: Vec<i16>,
    }

    impl CompactWriter {
        pub fn new() -> Self {
            Self { buf: Vec::new(), last: vec![0] }
        }

        pub fn varint(&mut self, mut v: u64) {
            loop {
                if v < 0x80 {
                    self.buf.push(v as u8);
                    return;
                }
                self.buf.push((v as u8 & 0x7f) | 0x80);
                v >>= 7;
            }
        }

        pub fn zigzag(&mut self, v: i64) {
            self.varint(((v << 1) ^ (v >> 63)) as u64);
        }

        pub fn field(&mut self, id: i16, ty: u8) {
            let last = *self.last.last().unwrap();
            let delta = id - last;
            if delta > 0 && delta <= 15 {
                self.buf.push(((delta as u8) << 4) | ty);
            } else {
                self.buf.push(ty);
                self.zigzag(id as i64);
            }
            *self.last.last_mut().unwrap() = id;
        }

        pub fn i32_field(&mut self, id: i16, v: i32) {
            self.field(id, 5);
            self.zigzag(v as i64);
        }

        pub fn i64_field(&mut self, id: i16, v: i64) {
            self.field(id, 6);
            self.zigzag(v);
        }

        pub fn binary_field(&mut self, id: i16, v: &[u8]) {
            self.field(id, 8);
            self.varint(v.len() as u64);
            self.buf.extend_from_slice(v);
        }

        pub fn struct_field(&mut self, id: i16) {
            self.field(id, 12);
            self.last.push(0);
        }

        pub fn end_struct(&mut self) {
            self.buf.push(0);
            self.last.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::writer::CompactWriter;
    use super::*;

    #[test]
    fn reads_fields_with_deltas_and_long_ids() {
        let mut w = CompactWriter::new();
        w.i32_field(1, -3);
        w.i64_field(3, 1 << 40);
        w.binary_field(40, b"hi");
        w.struct_field(41);
        w.i32_field(2, 7);
        w.end_struct();
        w.end_struct();

        let mut r = CompactReader::new(&w.buf);
        r.struct_begin();
        assert_eq!(r.field().unwrap(), Some((1, FieldType::I32)));
        assert_eq!(r.i32().unwrap(), -3);
        assert_eq!(r.field().unwrap(), Some((3, FieldType::I64)));
        assert_eq!(r.i64().unwrap(), 1 << 40);
        assert_eq!(r.field().unwrap(), Some((40, FieldType::Binary)));
        assert_eq!(r.binary().unwrap(), b"hi");
        let (id, ty) = r.field().unwrap().unwrap();
        assert_eq!((id, ty), (41, FieldType::Struct));
        r.skip(ty).unwrap();
        assert_eq!(r.field().unwrap(), None);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let mut r = CompactReader::new(&[0x15]);
        r.struct_begin();
        assert!(r.field().is_ok());
        assert!(r.i32().is_err());
    }
}
