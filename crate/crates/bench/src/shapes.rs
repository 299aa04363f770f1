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

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lakecell::io::{DataSource, FetchLog, DEFAULT_TAIL_HINT};
use lakecell::parquet::ParquetFile;
use lakecell::sql::backend::ParquetBackend;
use lakecell::sql::{Engine, Params, SqlError};
use serde::Serialize;

use crate::mock::{llm_udf, mock_llm_udf, MockLlmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    A,
    B,
    C,
    D,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::A, Shape::B, Shape::C, Shape::D];

    pub fn sql(self, n: usize) -> String {
        match self {
            Shape::A => format!("SELECT mock_llm(content) FROM traces LIMIT {n}"),
            Shape::B => format!("SELECT content FROM traces WHERE mock_llm(content) = 1 LIMIT {n}"),
            Shape::C => format!("SELECT content FROM traces ORDER BY mock_llm(content) LIMIT {n}"),
            Shape::D => format!("SELECT mock_llm(content) FROM traces WHERE turn > 0 LIMIT {n}"),
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Shape::A => "LIMIT N",
            Shape::B => "WHERE udf LIMIT N",
            Shape::C => "ORDER BY udf LIMIT N",
            Shape::D => "WHERE native, udf projected",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeResult {
    pub shape: Shape,
    #[serde(rename = "N")]
    pub n: usize,
    pub udf_calls: u64,
    pub wall_micros: u64,
    /// `udf_calls x delay`: the wall-clock of issuing the same calls one at a time.
    pub sequential_baseline_micros: u64,
    pub rows: usize,
}

/// An engine with the corpus registered as `traces` and the mock bound as
/// both `mock_llm` and `llm`.
pub async fn bench_engine(corpus: &Path, config: MockLlmConfig) -> Result<(Engine, Arc<FetchLog>), SqlError> {
    let log = FetchLog::new();
    let file = ParquetFile::open(DataSource::local(corpus, log.clone()), DEFAULT_TAIL_HINT).await?;
    let engine = Engine::new();
    engine.register_table("traces", Arc::new(ParquetBackend::new(file)))?;
    engine.register_udf(mock_llm_udf(config))?;
    engine.register_udf(llm_udf(config))?;
    Ok((engine, log))
}

pub async fn run_shape(engine: &Engine, shape: Shape, n: usize, delay: Duration) -> Result<ShapeResult, SqlError> {
    let start = Instant::now();
    let handle = engine.execute(&shape.sql(n), &Params::new())?;
    let stats = handle.stats();
    let rows = handle.collect().await?;
    let wall = start.elapsed();
    let udf_calls = stats.udf_calls("mock_llm");
    Ok(ShapeResult {
        shape,
        n,
        udf_calls,
        wall_micros: wall.as_micros() as u64,
        sequential_baseline_micros: udf_calls * delay.as_micros() as u64,
        rows: rows.len(),
    })
}

/// One JSON object per line.
pub fn report_jsonl(results: &[ShapeResult]) -> String {
    results
        .iter()
        .map(|r| serde_json::to_string(r).expect("plain struct") + "\n")
        .collect()
}

pub fn report_table(results: &[ShapeResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:<30} {:>5} {:>10} {:>12} {:>14} {:>8}",
        "shape", "query", "N", "udf_calls", "wall_ms", "sequential_ms", "overlap"
    );
    for r in results {
        let overlap = r.sequential_baseline_micros as f64 / r.wall_micros.max(1) as f64;
        let _ = writeln!(
            out,
            "{:<6} {:<30} {:>5} {:>10} {:>12.1} {:>14.1} {:>7.1}x",
            format!("{:?}", r.shape),
            r.shape.describe(),
            r.n,
            r.udf_calls,
            r.wall_micros as f64 / 1000.0,
            r.sequential_baseline_micros as f64 / 1000.0,
            overlap
        );
    }
    out
}
