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

//! Shell plumbing shared by the `lakecell` binary: configuration, table
//! registration, query execution and row output.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use lakecell::io::{FetchLog, HeaderRule, HttpFetchHook, SourceResolver};
use lakecell::sql::{Engine, ErrorMode, Params, QueryOptions, SqlError, StatsSnapshot};
use lakecell::Value;
use lakecell_bench::{llm_udf, mock_llm_udf, MockLlmConfig};
use tokio::sync::watch;

pub const EXIT_OK: i32 = 0;
pub const EXIT_QUERY: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_CANCELLED: i32 = 130;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliErrorMode {
    Fail,
    Null,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "lakecell", version, about = "Query Parquet, Iceberg, JSONL and CSV sources with SQL")]
pub struct CliConfig {
    /// Register a table as NAME=URI (.parquet, metadata.json, .jsonl, .csv). Repeatable.
    #[arg(long = "register", value_name = "NAME=URI", value_parser = parse_pair)]
    pub registrations: Vec<(String, String)>,

    /// Bind a query parameter as NAME=VALUE, referenced as $NAME. Repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_pair)]
    pub params: Vec<(String, String)>,

    #[arg(long = "format", value_enum, default_value = "table")]
    pub output_format: OutputFormat,

    /// Write every fetch event as JSON lines to this file.
    #[arg(long = "fetch-log", value_name = "PATH")]
    pub fetch_log_path: Option<PathBuf>,

    /// Print execution stats as JSON to stderr after each query.
    #[arg(long)]
    pub stats: bool,

    /// Latency of each mock inference call.
    #[arg(long = "mock-llm-delay-ms", default_value_t = 5)]
    pub mock_llm_delay_ms: u64,

    /// Maximum in-flight calls of the mock inference UDF.
    #[arg(long = "concurrency", default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub udf_concurrency: u32,

    #[arg(long = "error-mode", value_enum, default_value = "fail")]
    pub error_mode: CliErrorMode,

    /// JSON map of URL prefix to static headers, e.g. {"https://host/": {"Authorization": "Bearer ..."}}.
    #[arg(long = "fetch-hook-config", value_name = "PATH")]
    pub fetch_hook_config: Option<PathBuf>,

    /// Query to run. Without one, an interactive shell starts.
    pub sql: Option<String>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(format!("expected NAME=VALUE, got '{s}'")),
    }
}

/// Integers and floats bind as numbers, anything else as text.
pub fn parse_param(raw: &str) -> Value {
    if let Ok(i) = raw.parse::<i64>() {
        Value::Int(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        Value::Float(f)
    } else {
        Value::string(raw)
    }
}

pub fn exit_code(e: &SqlError) -> i32 {
    match e {
        SqlError::Cancelled => EXIT_CANCELLED,
        e if e.is_transport() => EXIT_TRANSPORT,
        _ => EXIT_QUERY,
    }
}

/// An engine with the configured tables and the mock inference UDFs registered.
pub struct Session {
    pub config: CliConfig,
    pub engine: Engine,
    pub log: Arc<FetchLog>,
    pub last_stats: Option<StatsSnapshot>,
    params: Params,
}

impl Session {
    pub async fn open(config: CliConfig) -> Result<Self, SqlError> {
        let rules = match &config.fetch_hook_config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| SqlError::bind(format!("cannot read {}: {e}", path.display())))?;
                HeaderRule::parse_config(&text)
                    .map_err(|e| SqlError::bind(format!("bad hook config {}: {e}", path.display())))?
            }
            None => vec![],
        };
        let log = FetchLog::new();
        let resolver = SourceResolver::new(log.clone()).with_hook(Arc::new(HttpFetchHook::new(rules)));
        let engine = Engine::new();
        let mock = MockLlmConfig {
            delay: Duration::from_millis(config.mock_llm_delay_ms),
            concurrency: config.udf_concurrency as usize,
            ..MockLlmConfig::default()
        };
        engine.register_udf(mock_llm_udf(mock))?;
        engine.register_udf(llm_udf(mock))?;
        for (name, uri) in &config.registrations {
            engine.register_uri(name, uri, &resolver).await?;
        }
        let params = config
            .params
            .iter()
            .map(|(k, v)| (k.clone(), parse_param(v)))
            .collect();
        Ok(Self {
            config,
            engine,
            log,
            last_stats: None,
            params,
        })
    }

    fn options(&self) -> QueryOptions {
        QueryOptions {
            error_mode: match self.config.error_mode {
                CliErrorMode::Fail => ErrorMode::Fail,
                CliErrorMode::Null => ErrorMode::Null,
            },
            ..QueryOptions::default()
        }
    }

    /// Runs one statement, writing rows to `out` as they arrive. A change on
    /// `interrupts` cancels the query.
    pub async fn run(
        &mut self,
        sql: &str,
        out: &mut dyn Write,
        interrupts: &mut watch::Receiver<u64>,
    ) -> Result<u64, SqlError> {
        interrupts.borrow_and_update();
        let mut handle = self.engine.execute_with(sql, &self.params, self.options())?;
        let token = handle.cancel_token();
        let mut watcher = interrupts.clone();
        let guard = tokio::spawn(async move {
            if watcher.changed().await.is_ok() {
                token.cancel();
            }
        });
        let stats = handle.stats();
        let mut writer = RowWriter::new(self.config.output_format, handle.columns().to_vec());
        let result = async {
            writer.header(out)?;
            while let Some(row) = handle.next().await {
                writer.row(out, &row?)?;
            }
            writer.footer(out)?;
            Ok(writer.count)
        }
        .await;
        guard.abort();
        let snapshot = stats.snapshot();
        if self.config.stats {
            eprintln!("{}", snapshot.to_json());
        }
        self.last_stats = Some(snapshot);
        self.flush_fetch_log();
        result
    }

    pub fn flush_fetch_log(&self) {
        if let Some(path) = &self.config.fetch_log_path {
            if let Err(e) = std::fs::write(path, self.log.to_jsonl()) {
                eprintln!("warning: cannot write fetch log {}: {e}", path.display());
            }
        }
    }
}

fn io_err(e: std::io::Error) -> SqlError {
    SqlError::Eval(format!("output: {e}"))
}

/// Writes rows in the chosen format, flushing after each so slow queries show
/// partial output.
pub struct RowWriter {
    format: OutputFormat,
    columns: Vec<String>,
    widths: Vec<usize>,
    pub count: u64,
}

impl RowWriter {
    pub fn new(format: OutputFormat, columns: Vec<String>) -> Self {
        let widths = columns.iter().map(|c| c.chars().count().max(8)).collect();
        Self {
            format,
            columns,
            widths,
            count: 0,
        }
    }

    fn table_line(&self, cells: &[String]) -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&self.widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    }

    fn csv_line(cells: &[String]) -> Result<String, SqlError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(cells).map_err(|e| SqlError::Eval(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| SqlError::Eval(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn header(&mut self, out: &mut dyn Write) -> Result<(), SqlError> {
        let text = match self.format {
            OutputFormat::Table => {
                let rule: Vec<String> = self.widths.iter().map(|w| "-".repeat(*w)).collect();
                format!("{}\n{}\n", self.table_line(&self.columns), rule.join("-+-"))
            }
            OutputFormat::Csv => Self::csv_line(&self.columns)?,
            OutputFormat::Jsonl => return Ok(()),
        };
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(io_err)
    }

    pub fn row(&mut self, out: &mut dyn Write, row: &[Value]) -> Result<(), SqlError> {
        let text = match self.format {
            OutputFormat::Table => {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                format!("{}\n", self.table_line(&cells))
            }
            OutputFormat::Csv => {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| if v.is_null() { String::new() } else { v.to_string() })
                    .collect();
                Self::csv_line(&cells)?
            }
            OutputFormat::Jsonl => {
                // Built by hand so keys keep column order.
                let fields: Vec<String> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| format!("{}:{}", serde_json::Value::from(c.as_str()), v.to_output_json()))
                    .collect();
                format!("{{{}}}\n", fields.join(","))
            }
        };
        self.count += 1;
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(io_err)
    }

    pub fn footer(&mut self, out: &mut dyn Write) -> Result<(), SqlError> {
        if self.format == OutputFormat::Table {
            let noun = if self.count == 1 { "row" } else { "rows" };
            writeln!(out, "({} {noun})", self.count).and_then(|_| out.flush()).map_err(io_err)?;
        }
        Ok(())
    }
}

/// Forwards Ctrl-C as increments of a watch counter, so each statement and
/// the prompt can observe interrupts without the process exiting.
pub fn interrupt_channel() -> watch::Receiver<u64> {
    let (tx, rx) = watch::channel(0u64);
    tokio::spawn(async move {
        while tokio::signal::ctrl_c().await.is_ok() {
            tx.send_modify(|n| *n += 1);
        }
    });
    rx
}
