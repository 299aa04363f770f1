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

use std::io::Read;

use super::metadata::Codec;

/// Decompresses one page body. `expected` is the uncompressed size from the page header.
pub(crate) fn decompress(codec: Codec, input: &[u8], expected: usize) -> Result<Vec<u8>, String> {
    let out = match codec {
        Codec::Uncompressed => input.to_vec(),
        Codec::Snappy => snap::raw::Decoder::new()
            .decompress_vec(input)
            .map_err(|e| format!("snappy: {e}"))?,
        Codec::Gzip => {
            let mut out = Vec::with_capacity(expected);
            flate2::read::MultiGzDecoder::new(input)
                .read_to_end(&mut out)
                .map_err(|e| format!("gzip: {e}"))?;
            out
        }
        Codec::Zstd => zstd::stream::decode_all(input).map_err(|e| format!("zstd: {e}"))?,
        Codec::Unsupported(_) => return Err(format!("codec {} is not supported", codec.name())),
    };
    if out.len() != expected {
        return Err(format!(
            "decompressed {} bytes, page header says {expected}",
            out.len()
        ));
    }
    Ok(out)
}
