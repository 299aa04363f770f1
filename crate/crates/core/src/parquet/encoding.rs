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

//! Value and level encodings: PLAIN and the RLE / bit-packed hybrid.

use bytes::Bytes;

use super::schema::{LeafConverter, PhysicalType};
use crate::value::Value;

/// Decoder for the RLE / bit-packing hybrid used by levels, booleans and dictionary indices.
pub(crate) struct RleDecoder<'a> {
    buf: &'a [u8],
    pos: usize,
    bit_width: u32,
}

impl<'a> RleDecoder<'a> {
    pub fn new(buf: &'a [u8], bit_width: u32) -> Self {
        Self { buf, pos: 0, bit_width }
    }

    fn varint(&mut self) -> Result<u64, String> {
        let mut out = 0u64;
        let mut shift = 0;
        loop {
            let b = *self.buf.get(self.pos).ok_or("truncated run header")?;
            self.pos += 1;
            if shift > 63 {
                return Err("run header overflow".into());
            }
            out |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(out);
            }
            shift += 7;
        }
    }

    /// Decodes exactly `n` values, appending to `out`.
    pub fn decode(&mut self, n: usize, out: &mut Vec<u32>) -> Result<(), String> {
        if self.bit_width > 32 {
            return Err(format!("bit width {} too large", self.bit_width));
        }
        let target = out.len() + n;
        if self.bit_width == 0 {
            out.resize(target, 0);
            return Ok(());
        }
        while out.len() < target {
            let header = self.varint()?;
            if header & 1 == 1 {
                let groups = (header >> 1) as usize;
                let count = groups * 8;
                let bits = count * self.bit_width as usize;
                let bytes = bits.div_ceil(8);
                let end = self.pos + bytes;
                if end > self.buf.len() {
                    // Writers may truncate the final group's padding.
                    let avail = (self.buf.len() - self.pos) * 8 / self.bit_width as usize;
                    if avail < target - out.len() {
                        return Err("truncated bit-packed run".into());
                    }
                }
                let data = &self.buf[self.pos..end.min(self.buf.len())];
                let take = count.min(target - out.len());
                unpack(data, self.bit_width, take, out);
                self.pos = end.min(self.buf.len());
            } else {
                let count = (header >> 1) as usize;
                let width = (self.bit_width as usize).div_ceil(8);
                let bytes = self
                    .buf
                    .get(self.pos..self.pos + width)
                    .ok_or("truncated RLE run")?;
                let mut v = 0u32;
                for (i, b) in bytes.iter().enumerate() {
                    v |= (*b as u32) << (8 * i);
                }
                self.pos += width;
                if count == 0 {
                    return Err("zero-length RLE run".into());
                }
                let take = count.min(target - out.len());
                out.extend(std::iter::repeat(v).take(take));
            }
        }
        Ok(())
    }
}

fn unpack(data: &[u8], width: u32, n: usize, out: &mut Vec<u32>) {
    let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
    let mut bit = 0usize;
    for _ in 0..n {
        let mut v = 0u64;
        let byte = bit / 8;
        let shift = bit % 8;
        for k in 0..5 {
            if let Some(b) = data.get(byte + k) {
                v |= (*b as u64) << (8 * k);
            }
        }
        out.push(((v >> shift) as u32) & mask);
        bit += width as usize;
    }
}

/// Levels prefixed with a 4-byte little-endian length (data page v1 layout).
/// Returns the levels and the number of bytes consumed.
pub(crate) fn read_prefixed_levels(
    buf: &[u8],
    max_level: i16,
    n: usize,
) -> Result<(Vec<i16>, usize), String> {
    let len_bytes = buf.get(..4).ok_or("truncated level length")?;
    let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
    let body = buf.get(4..4 + len).ok_or("level data runs past page end")?;
    Ok((decode_levels(body, max_level, n)?, 4 + len))
}

pub(crate) fn decode_levels(buf: &[u8], max_level: i16, n: usize) -> Result<Vec<i16>, String> {
    let mut raw = Vec::with_capacity(n);
    RleDecoder::new(buf, bit_width(max_level as u32)).decode(n, &mut raw)?;
    let mut out = Vec::with_capacity(n);
    for v in raw {
        if v > max_level as u32 {
            return Err(format!("level {v} exceeds maximum {max_level}"));
        }
        out.push(v as i16);
    }
    Ok(out)
}

pub(crate) fn bit_width(max: u32) -> u32 {
    32 - max.leading_zeros()
}

/// Decodes `n` PLAIN values of one leaf into runtime values.
pub(crate) fn decode_plain(
    buf: &Bytes,
    conv: &LeafConverter,
    n: usize,
    out: &mut Vec<Value>,
) -> Result<(), String> {
    let need = |width: usize| -> Result<(), String> {
        if buf.len() < width * n {
            Err(format!("{n} values of width {width} need {} bytes, page has {}", width * n, buf.len()))
        } else {
            Ok(())
        }
    };
    match conv.physical {
        PhysicalType::Boolean => {
            if buf.len() * 8 < n {
                return Err("truncated boolean values".into());
            }
            out.extend((0..n).map(|i| Value::Boolean(buf[i / 8] >> (i % 8) & 1 == 1)));
        }
        PhysicalType::Int32 => {
            need(4)?;
            out.extend(
                buf.chunks_exact(4)
                    .take(n)
                    .map(|c| conv.int32(i32::from_le_bytes(c.try_into().expect("4")))),
            );
        }
        PhysicalType::Int64 => {
            need(8)?;
            out.extend(
                buf.chunks_exact(8)
                    .take(n)
                    .map(|c| conv.int64(i64::from_le_bytes(c.try_into().expect("8")))),
            );
        }
        PhysicalType::Int96 => {
            need(12)?;
            out.extend(buf.chunks_exact(12).take(n).map(int96_to_timestamp));
        }
        PhysicalType::Float => {
            need(4)?;
            out.extend(
                buf.chunks_exact(4)
                    .take(n)
                    .map(|c| Value::Float(f32::from_le_bytes(c.try_into().expect("4")) as f64)),
            );
        }
        PhysicalType::Double => {
            need(8)?;
            out.extend(
                buf.chunks_exact(8)
                    .take(n)
                    .map(|c| Value::Float(f64::from_le_bytes(c.try_into().expect("8")))),
            );
        }
        PhysicalType::ByteArray => {
            let mut pos = 0usize;
            for _ in 0..n {
                let len_bytes = buf.get(pos..pos + 4).ok_or("truncated byte array length")?;
                let len = u32::from_le_bytes(len_bytes.try_into().expect("4")) as usize;
                pos += 4;
                if pos + len > buf.len() {
                    return Err("byte array runs past page end".into());
                }
                out.push(conv.bytes(buf.slice(pos..pos + len)));
                pos += len;
            }
        }
        PhysicalType::FixedLenByteArray(width) => {
            need(width)?;
            out.extend((0..n).map(|i| conv.bytes(buf.slice(i * width..(i + 1) * width))));
        }
    }
    Ok(())
}

/// Legacy INT96 timestamps: nanos-of-day (8 bytes) then Julian day (4 bytes).
fn int96_to_timestamp(c: &[u8]) -> Value {
    const JULIAN_EPOCH: i64 = 2_440_588;
    let nanos = i64::from_le_bytes(c[..8].try_into().expect("8"));
    let day = i32::from_le_bytes(c[8..12].try_into().expect("4")) as i64;
    Value::Timestamp((day - JULIAN_EPOCH) * 86_400_000_000 + nanos / 1000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parquet::schema::LogicalType;

    #[test]
    fn rle_and_bit_packed_runs() {
        // RLE run of 3 x value 5 (width 3), then a bit-packed group of 8 values 0..8.
        let mut buf = vec![3 << 1, 5];
        buf.push((1 << 1) | 1);
        // 0..8 at width 3, packed LSB first.
        let mut bits = 0u64;
        for (i, v) in (0..8u64).enumerate() {
            bits |= v << (3 * i);
        }
        buf.extend_from_slice(&bits.to_le_bytes()[..3]);
        let mut out = Vec::new();
        RleDecoder::new(&buf, 3).decode(11, &mut out).unwrap();
        assert_eq!(out, [5, 5, 5, 0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn levels_above_max_are_rejected() {
        let buf = [2 << 1, 3];
        assert!(decode_levels(&buf, 1, 2).is_err());
        assert_eq!(decode_levels(&buf, 3, 2).unwrap(), [3, 3]);
    }

    #[test]
    fn bit_widths() {
        assert_eq!(bit_width(0), 0);
        assert_eq!(bit_width(1), 1);
        assert_eq!(bit_width(3), 2);
        assert_eq!(bit_width(4), 3);
    }

    #[test]
    fn plain_byte_arrays_and_booleans() {
        let conv = LeafConverter {
            physical: PhysicalType::ByteArray,
            logical: LogicalType::String,
        };
        let mut raw = Vec::new();
        for s in ["ab", "", "xyz"] {
            raw.extend_from_slice(&(s.len() as u32).to_le_bytes());
            raw.extend_from_slice(s.as_bytes());
        }
        let mut out = Vec::new();
        decode_plain(&Bytes::from(raw), &conv, 3, &mut out).unwrap();
        assert_eq!(out, [Value::string("ab"), Value::string(""), Value::string("xyz")]);

        let conv = LeafConverter {
            physical: PhysicalType::Boolean,
            logical: LogicalType::None,
        };
        let mut out = Vec::new();
        decode_plain(&Bytes::from_static(&[0b101]), &conv, 3, &mut out).unwrap();
        assert_eq!(out, [Value::Boolean(true), Value::Boolean(false), Value::Boolean(true)]);
    }
}
