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

//! Shared test helpers: an object-store hook serving the committed fixture tree.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bytes::Bytes;
use lakecell::io::{FetchHook, FetchLog, FetchRequest, FetchResponse, Method, SourceResolver};

pub const STORE_PREFIX: &str = "s3://fixture-bucket/warehouse";

pub fn iceberg_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/iceberg")
}

/// Serves `s3://fixture-bucket/warehouse/<key>` from `fixtures/iceberg/<key>`,
/// honouring HEAD and absolute byte ranges like an object store.
pub fn fixture_hook() -> Arc<dyn FetchHook> {
    let root = iceberg_dir();
    Arc::new(move |req: FetchRequest| {
        let root = root.clone();
        async move {
            let not_found = FetchResponse {
                status: 404,
                headers: vec![],
                body: Bytes::new(),
            };
            let Some(key) = req.url.strip_prefix(STORE_PREFIX) else {
                return Ok(not_found);
            };
            let Ok(data) = std::fs::read(root.join(key.trim_start_matches('/'))) else {
                return Ok(not_found);
            };
            let data = Bytes::from(data);
            let len = data.len() as u64;
            Ok(match (req.method, req.range) {
                (Method::Head, _) => FetchResponse {
                    status: 200,
                    headers: vec![("content-length".into(), len.to_string())],
                    body: Bytes::new(),
                },
                (Method::Get, None) => FetchResponse {
                    status: 200,
                    headers: vec![],
                    body: data,
                },
                (Method::Get, Some(r)) if r.end() > len => FetchResponse {
                    status: 416,
                    headers: vec![("content-range".into(), format!("bytes */{len}"))],
                    body: Bytes::new(),
                },
                (Method::Get, Some(r)) => FetchResponse {
                    status: 206,
                    headers: vec![(
                        "content-range".into(),
                        format!("bytes {}-{}/{len}", r.offset, r.end() - 1),
                    )],
                    body: data.slice(r.offset as usize..r.end() as usize),
                },
            })
        }
    })
}

pub fn fixture_resolver() -> (SourceResolver, Arc<FetchLog>) {
    let log = FetchLog::new();
    (SourceResolver::new(log.clone()).with_hook(fixture_hook()), log)
}

/// `(table name, metadata URI)` from the fixture index.
pub fn fixture_tables() -> Vec<(String, String)> {
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(iceberg_dir().join("index.json")).unwrap()).unwrap();
    let mut out: Vec<(String, String)> = index["tables"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(name, t)| {
            let uri = format!(
                "{STORE_PREFIX}/{}/{}",
                t["dir"].as_str().unwrap(),
                t["metadata"].as_str().unwrap()
            );
            (name.clone(), uri)
        })
        .collect();
    out.sort();
    out
}

pub fn oracle(table: &str) -> serde_json::Value {
    let path = iceberg_dir().join("db").join(table).join("oracle.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
