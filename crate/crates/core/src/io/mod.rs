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

//! Byte-range access to local files and remote objects.
//!
//! Remote traffic goes exclusively through a caller-supplied [`FetchHook`]; the
//! engine never reads credentials itself. Every request is recorded in a
//! shared [`FetchLog`], which is what the laziness tests assert against.

mod http;

use std::fmt;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use async_trait::async_trait;
use bytes::Bytes;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncSeekExt};
use tokio::sync::Semaphore;

pub use http::{HeaderRule, HttpFetchHook};

/// Default size of the speculative trailing read.
pub const DEFAULT_TAIL_HINT: u64 = 512 * 1024;
/// Default number of concurrent range reads per source.
pub const DEFAULT_IN_FLIGHT: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("range {offset}+{length} is out of bounds for {url} (length {file_length})")]
    RangeOutOfBounds {
        url: String,
        offset: u64,
        length: u64,
        file_length: u64,
    },
    #[error("invalid range: length must be positive")]
    EmptyRange,
    #[error("{0} is empty")]
    EmptyFile(String),
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("no fetch hook registered for {0}")]
    NoHook(String),
}

impl IoError {
    pub fn transport(url: impl Into<String>, message: impl fmt::Display) -> Self {
        IoError::Transport {
            url: url.into(),
            message: message.to_string(),
        }
    }
}

/// Half-open byte window `[offset, offset + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ByteRange {
    pub offset: u64,
    pub length: u64,
}

impl ByteRange {
    pub fn new(offset: u64, length: u64) -> Self {
        Self { offset, length }
    }

    pub fn end(&self) -> u64 {
        self.offset + self.length
    }

    /// Absolute-offset `Range` header value. Suffix forms are never produced.
    pub fn header_value(&self) -> String {
        format!("bytes={}-{}", self.offset, self.end() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "HEAD")]
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRequest {
    pub url: String,
    pub range: Option<ByteRange>,
    pub method: Method,
    pub headers: Vec<(String, String)>,
}

impl FetchRequest {
    pub fn head(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            range: None,
            method: Method::Head,
            headers: Vec::new(),
        }
    }

    pub fn get(url: impl Into<String>, range: Option<ByteRange>) -> Self {
        let headers = range
            .map(|r| vec![("Range".to_string(), r.header_value())])
            .unwrap_or_default();
        Self {
            url: url.into(),
            range,
            method: Method::Get,
            headers,
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FetchResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Bytes,
}

impl FetchResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Caller-injected transport. Signing, auth headers and retry policy all live
/// behind this trait; hooks must tolerate concurrent invocation.
#[async_trait]
pub trait FetchHook: Send + Sync {
    async fn fetch(&self, request: FetchRequest) -> Result<FetchResponse, IoError>;
}

#[async_trait]
impl<F, Fut> FetchHook for F
where
    F: Fn(FetchRequest) -> Fut + Send + Sync,
    Fut: Future<Output = Result<FetchResponse, IoError>> + Send,
{
    async fn fetch(&self, request: FetchRequest) -> Result<FetchResponse, IoError> {
        (self)(request).await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Tail,
    Footer,
    ColumnChunk,
    MetadataJson,
    ManifestList,
    Manifest,
    DeleteFile,
    /// Whole-file read of a row-oriented source (JSONL, CSV).
    RowFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchLogEvent {
    pub sequence: u64,
    pub url: String,
    pub range: Option<ByteRange>,
    pub purpose: Purpose,
    pub bytes_returned: u64,
    pub wall_micros: u64,
}

/// Append-only request log, safe for concurrent appends; `sequence` gives the total order.
#[derive(Debug, Default)]
pub struct FetchLog {
    next: AtomicU64,
    events: Mutex<Vec<FetchLogEvent>>,
}

impl FetchLog {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn record(
        &self,
        url: &str,
        range: Option<ByteRange>,
        purpose: Purpose,
        bytes_returned: u64,
        started: Instant,
    ) {
        let mut events = self.events.lock().expect("fetch log poisoned");
        let sequence = self.next.fetch_add(1, Ordering::SeqCst);
        events.push(FetchLogEvent {
            sequence,
            url: url.to_string(),
            range,
            purpose,
            bytes_returned,
            wall_micros: started.elapsed().as_micros() as u64,
        });
    }

    pub fn events(&self) -> Vec<FetchLogEvent> {
        let mut events = self.events.lock().expect("fetch log poisoned").clone();
        events.sort_by_key(|e| e.sequence);
        events
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("fetch log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.events.lock().expect("fetch log poisoned").clear();
    }

    pub fn total_bytes(&self) -> u64 {
        self.events
            .lock()
            .expect("fetch log poisoned")
            .iter()
            .map(|e| e.bytes_returned)
            .sum()
    }

    /// One JSON object per line, in sequence order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in self.events() {
            out.push_str(&serde_json::to_string(&event).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone)]
enum Backend {
    Local(PathBuf),
    Remote(Arc<dyn FetchHook>),
    /// Bytes already fetched (and logged) once; re-reads are not fetch events.
    Memory(Bytes),
}

/// One readable object: a local file or a URL served through a fetch hook.
#[derive(Clone)]
pub struct DataSource {
    inner: Arc<SourceInner>,
}

struct SourceInner {
    url: String,
    backend: Backend,
    log: Arc<FetchLog>,
    limiter: Semaphore,
    length: OnceLock<u64>,
}

impl fmt::Debug for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataSource")
            .field("url", &self.inner.url)
            .finish()
    }
}

impl DataSource {
    pub fn local(path: impl AsRef<Path>, log: Arc<FetchLog>) -> Self {
        let path = path.as_ref().to_path_buf();
        Self::build(path.display().to_string(), Backend::Local(path), log, DEFAULT_IN_FLIGHT)
    }

    pub fn remote(url: impl Into<String>, hook: Arc<dyn FetchHook>, log: Arc<FetchLog>) -> Self {
        Self::build(url.into(), Backend::Remote(hook), log, DEFAULT_IN_FLIGHT)
    }

    /// An object whose bytes are already in memory, e.g. a delete file fetched whole.
    pub fn memory(url: impl Into<String>, bytes: Bytes, log: Arc<FetchLog>) -> Self {
        let src = Self::build(url.into(), Backend::Memory(bytes.clone()), log, DEFAULT_IN_FLIGHT);
        let _ = src.inner.length.set(bytes.len() as u64);
        src
    }

    fn build(url: String, backend: Backend, log: Arc<FetchLog>, in_flight: usize) -> Self {
        Self {
            inner: Arc::new(SourceInner {
                url,
                backend,
                log,
                limiter: Semaphore::new(in_flight.max(1)),
                length: OnceLock::new(),
            }),
        }
    }

    /// Same source with a different in-flight cap.
    pub fn with_in_flight(self, cap: usize) -> Self {
        let inner = &self.inner;
        Self::build(inner.url.clone(), inner.backend.clone(), inner.log.clone(), cap)
    }

    pub fn url(&self) -> &str {
        &self.inner.url
    }

    pub fn log(&self) -> &Arc<FetchLog> {
        &self.inner.log
    }

    /// Length if a previous request already learned it.
    pub fn known_length(&self) -> Option<u64> {
        self.inner.length.get().copied()
    }

    /// Reads exactly `range.length` bytes starting at `range.offset`.
    pub async fn read_range(&self, range: ByteRange, purpose: Purpose) -> Result<Bytes, IoError> {
        if range.length == 0 {
            return Err(IoError::EmptyRange);
        }
        if let Some(len) = self.known_length() {
            self.check_bounds(range, len)?;
        }
        if let Backend::Memory(bytes) = &self.inner.backend {
            return Ok(bytes.slice(range.offset as usize..range.end() as usize));
        }
        let _permit = self.inner.limiter.acquire().await.expect("limiter closed");
        let started = Instant::now();
        let bytes = match &self.inner.backend {
            Backend::Local(path) => {
                let mut file = tokio::fs::File::open(path)
                    .await
                    .map_err(|e| IoError::transport(&self.inner.url, e))?;
                let len = file
                    .metadata()
                    .await
                    .map_err(|e| IoError::transport(&self.inner.url, e))?
                    .len();
                let _ = self.inner.length.set(len);
                self.check_bounds(range, len)?;
                file.seek(std::io::SeekFrom::Start(range.offset))
                    .await
                    .map_err(|e| IoError::transport(&self.inner.url, e))?;
                let mut buf = vec![0u8; range.length as usize];
                file.read_exact(&mut buf)
                    .await
                    .map_err(|e| IoError::transport(&self.inner.url, e))?;
                Bytes::from(buf)
            }
            Backend::Remote(hook) => {
                let response = hook
                    .fetch(FetchRequest::get(&self.inner.url, Some(range)))
                    .await?;
                if response.status == 416 {
                    return Err(IoError::RangeOutOfBounds {
                        url: self.inner.url.clone(),
                        offset: range.offset,
                        length: range.length,
                        file_length: content_range_total(&response).unwrap_or(0),
                    });
                }
                check_status(&self.inner.url, &response)?;
                if let Some(total) = content_range_total(&response) {
                    let _ = self.inner.length.set(total);
                }
                if response.body.len() as u64 != range.length {
                    let file_length = self.known_length().unwrap_or(0);
                    if file_length != 0 && range.end() > file_length {
                        return Err(IoError::RangeOutOfBounds {
                            url: self.inner.url.clone(),
                            offset: range.offset,
                            length: range.length,
                            file_length,
                        });
                    }
                    return Err(IoError::transport(
                        &self.inner.url,
                        format!(
                            "expected {} bytes for {}, got {} (status {})",
                            range.length,
                            range.header_value(),
                            response.body.len(),
                            response.status
                        ),
                    ));
                }
                response.body
            }
            Backend::Memory(_) => unreachable!("handled above"),
        };
        self.inner
            .log
            .record(&self.inner.url, Some(range), purpose, bytes.len() as u64, started);
        Ok(bytes)
    }

    /// Reads the final `min(tail_hint, length)` bytes, returning them with the total length.
    ///
    /// Remote sources issue one HEAD to learn the length and one GET with an
    /// absolute range; both are logged under `purpose`.
    pub async fn read_tail(&self, tail_hint: u64, purpose: Purpose) -> Result<(Bytes, u64), IoError> {
        let tail_hint = tail_hint.max(8);
        let len = self.length(purpose).await?;
        if len == 0 {
            return Err(IoError::EmptyFile(self.inner.url.clone()));
        }
        let take = tail_hint.min(len);
        let bytes = self.read_range(ByteRange::new(len - take, take), purpose).await?;
        Ok((bytes, len))
    }

    /// Total object length; a HEAD request (logged with zero bytes) for remote sources.
    pub async fn length(&self, purpose: Purpose) -> Result<u64, IoError> {
        if let Some(len) = self.known_length() {
            return Ok(len);
        }
        let len = match &self.inner.backend {
            Backend::Local(path) => tokio::fs::metadata(path)
                .await
                .map_err(|e| IoError::transport(&self.inner.url, e))?
                .len(),
            Backend::Remote(hook) => {
                let _permit = self.inner.limiter.acquire().await.expect("limiter closed");
                let started = Instant::now();
                let response = hook.fetch(FetchRequest::head(&self.inner.url)).await?;
                check_status(&self.inner.url, &response)?;
                let len = response
                    .header("content-length")
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .ok_or_else(|| {
                        IoError::transport(&self.inner.url, "HEAD response lacks Content-Length")
                    })?;
                self.inner.log.record(&self.inner.url, None, purpose, 0, started);
                len
            }
            Backend::Memory(bytes) => bytes.len() as u64,
        };
        let _ = self.inner.length.set(len);
        Ok(len)
    }

    /// Reads the whole object in one request (metadata documents, manifests, delete files).
    pub async fn read_all(&self, purpose: Purpose) -> Result<Bytes, IoError> {
        if let Backend::Memory(bytes) = &self.inner.backend {
            return Ok(bytes.clone());
        }
        let _permit = self.inner.limiter.acquire().await.expect("limiter closed");
        let started = Instant::now();
        let bytes = match &self.inner.backend {
            Backend::Local(path) => Bytes::from(
                tokio::fs::read(path)
                    .await
                    .map_err(|e| IoError::transport(&self.inner.url, e))?,
            ),
            Backend::Remote(hook) => {
                let response = hook.fetch(FetchRequest::get(&self.inner.url, None)).await?;
                check_status(&self.inner.url, &response)?;
                response.body
            }
            Backend::Memory(_) => unreachable!("handled above"),
        };
        let _ = self.inner.length.set(bytes.len() as u64);
        let range = (!bytes.is_empty()).then(|| ByteRange::new(0, bytes.len() as u64));
        self.inner
            .log
            .record(&self.inner.url, range, purpose, bytes.len() as u64, started);
        Ok(bytes)
    }

    fn check_bounds(&self, range: ByteRange, len: u64) -> Result<(), IoError> {
        if range.end() > len {
            return Err(IoError::RangeOutOfBounds {
                url: self.inner.url.clone(),
                offset: range.offset,
                length: range.length,
                file_length: len,
            });
        }
        Ok(())
    }
}

fn check_status(url: &str, response: &FetchResponse) -> Result<(), IoError> {
    if (200..300).contains(&response.status) {
        Ok(())
    } else {
        Err(IoError::transport(url, format!("HTTP status {}", response.status)))
    }
}

fn content_range_total(response: &FetchResponse) -> Option<u64> {
    let value = response.header("content-range")?;
    value.rsplit('/').next()?.trim().parse().ok()
}

/// Maps URIs to [`DataSource`]s: bare paths and `file://` go to the local
/// filesystem, everything else to the configured hook.
#[derive(Clone)]
pub struct SourceResolver {
    hook: Option<Arc<dyn FetchHook>>,
    log: Arc<FetchLog>,
    in_flight: usize,
}

impl SourceResolver {
    pub fn new(log: Arc<FetchLog>) -> Self {
        Self {
            hook: None,
            log,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }

    pub fn with_hook(mut self, hook: Arc<dyn FetchHook>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn with_in_flight(mut self, cap: usize) -> Self {
        self.in_flight = cap.max(1);
        self
    }

    pub fn log(&self) -> &Arc<FetchLog> {
        &self.log
    }

    pub fn open(&self, uri: &str) -> Result<DataSource, IoError> {
        if let Some(path) = uri.strip_prefix("file://") {
            return Ok(DataSource::local(path, self.log.clone()).with_in_flight(self.in_flight));
        }
        if !uri.contains("://") {
            return Ok(DataSource::local(uri, self.log.clone()).with_in_flight(self.in_flight));
        }
        let hook = match &self.hook {
            Some(hook) => hook.clone(),
            None if uri.starts_with("http://") || uri.starts_with("https://") => {
                Arc::new(HttpFetchHook::new(Vec::new())) as Arc<dyn FetchHook>
            }
            None => return Err(IoError::NoHook(uri.to_string())),
        };
        Ok(DataSource::remote(uri, hook, self.log.clone()).with_in_flight(self.in_flight))
    }
}
