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

use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use lakecell_bench::{bench_engine, generate_corpus, report_jsonl, report_table, run_shape, MockLlmConfig, Shape, TraceCorpusSpec};

/// Generate the trace corpus and run the four query shapes against the mock UDF.
#[derive(Parser)]
#[command(name = "lakecell-bench", version)]
struct Args {
    #[arg(long, default_value_t = 10_000)]
    rows: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1_000)]
    row_group_rows: usize,
    /// LIMIT used by every shape.
    #[arg(short = 'n', long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    delay_ms: u64,
    #[arg(long, default_value_t = 256)]
    concurrency: usize,
    /// Write (or reuse) the corpus here instead of a temporary file.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Write the JSONL report here; the table always goes to stdout.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let spec = TraceCorpusSpec {
        rows: args.rows,
        seed: args.seed,
        row_group_rows: args.row_group_rows,
        ..Default::default()
    };
    let tmp = tempfile::tempdir()?;
    let path = args.corpus.clone().unwrap_or_else(|| tmp.path().join("traces.parquet"));
    if !path.exists() {
        generate_corpus(&spec, &path)?;
    }
    let config = MockLlmConfig {
        delay: Duration::from_millis(args.delay_ms),
        concurrency: args.concurrency,
        ..Default::default()
    };
    let mut results = Vec::new();
    for shape in Shape::ALL {
        // Fresh engine per shape so no memoized state carries over.
        let (engine, _) = bench_engine(&path, config).await?;
        results.push(run_shape(&engine, shape, args.n, config.delay).await?);
    }
    print!("{}", report_table(&results));
    match &args.json_out {
        Some(p) => std::fs::write(p, report_jsonl(&results))?,
        None => print!("{}", report_jsonl(&results)),
    }
    Ok(())
}
