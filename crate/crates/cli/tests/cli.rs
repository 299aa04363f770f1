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

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::mpsc;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lakecell::io::{DataSource, FetchLog, Purpose, DEFAULT_TAIL_HINT};
use lakecell::parquet::ParquetFile;
use lakecell_bench::{generate_corpus, TraceCorpusSpec};

fn corpus() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.parquet");
        generate_corpus(&TraceCorpusSpec::default(), &path).unwrap();
        (dir, path)
    })
    .1
}

fn lakecell() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lakecell"))
}

fn with_traces(extra: &[&str]) -> Command {
    let mut cmd = lakecell();
    cmd.arg("--register").arg(format!("traces={}", corpus().display()));
    cmd.args(extra);
    cmd
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap_or(-1),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

#[test]
fn count_star_prints_corpus_size() {
    let (code, out, _) = run(&mut with_traces(&["--format", "csv", "SELECT COUNT(*) FROM traces"]));
    assert_eq!(code, 0);
    assert_eq!(out.lines().nth(1), Some("10000"));
}

#[test]
fn exit_codes_follow_error_kind() {
    let (code, _, err) = run(lakecell().arg("SELECT * FROM nowhere"));
    assert_eq!(code, 2);
    assert!(err.contains("unknown table 'nowhere'"), "{err}");

    let (code, _, err) = run(&mut with_traces(&["SELECT lenght(content) FROM traces"]));
    assert_eq!(code, 2);
    assert!(err.contains("did you mean 'length'"), "{err}");

    let (code, _, err) = run(&mut with_traces(&["SELECT bogus FROM traces"]));
    assert_eq!(code, 2);
    assert!(err.contains("session_id, turn, tool, content, is_error"), "{err}");

    let (code, _, _) = run(lakecell().args(["--register", "t=/definitely/not/here.parquet", "SELECT 1"]));
    assert_eq!(code, 3);

    let (code, _, err) = run(&mut with_traces(&["--register", "TRACES=/x.csv", "SELECT 1"]));
    assert_eq!(code, 2);
    assert!(err.contains("already registered"), "{err}");
}

#[test]
fn fetch_log_touches_only_the_projected_column() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("fetch.jsonl");
    let (code, out, _) = run(&mut with_traces(&[
        "--fetch-log",
        log_path.to_str().unwrap(),
        "--format",
        "jsonl",
        "SELECT session_id FROM traces LIMIT 1",
    ]));
    assert_eq!(code, 0);
    assert_eq!(out, "{\"session_id\":\"s00000\"}\n");

    let events: Vec<serde_json::Value> = std::fs::read_to_string(&log_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(events.iter().any(|e| e["purpose"] == "tail"));

    let rt = tokio::runtime::Runtime::new().unwrap();
    let meta = rt
        .block_on(ParquetFile::open(DataSource::local(corpus(), FetchLog::new()), DEFAULT_TAIL_HINT))
        .unwrap()
        .metadata;
    let session_chunks: Vec<u64> = meta.row_groups.iter().map(|rg| rg.columns[0].byte_range().offset).collect();
    let chunks: Vec<u64> = events
        .iter()
        .filter(|e| e["purpose"] == serde_json::to_value(Purpose::ColumnChunk).unwrap())
        .map(|e| e["range"]["offset"].as_u64().unwrap())
        .collect();
    assert_eq!(chunks.len(), 1, "{events:?}");
    assert!(session_chunks.contains(&chunks[0]));
}

#[test]
fn csv_and_jsonl_sources_join() {
    let dir = tempfile::tempdir().unwrap();
    let users = dir.path().join("users.csv");
    let orders = dir.path().join("orders.jsonl");
    std::fs::write(&users, "id,name\n1,ada\n2,lin\n3,sam\n").unwrap();
    std::fs::write(
        &orders,
        "{\"user\":1,\"total\":5}\n{\"user\":3,\"total\":7}\n{\"user\":1,\"total\":2}\n",
    )
    .unwrap();
    let (code, out, err) = run(lakecell().args([
        "--register",
        &format!("users={}", users.display()),
        "--register",
        &format!("orders={}", orders.display()),
        "--format",
        "csv",
        "SELECT u.name, SUM(o.total) AS spent FROM users u JOIN orders o ON u.id = o.user GROUP BY u.name ORDER BY spent DESC",
    ]));
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "name,spent\nada,7\nsam,7\n");
}

#[test]
fn stats_go_to_stderr() {
    let (code, out, err) = run(&mut with_traces(&[
        "--stats",
        "--mock-llm-delay-ms",
        "1",
        "--format",
        "jsonl",
        "SELECT mock_llm(content) AS label FROM traces LIMIT 3",
    ]));
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
    let stats: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(stats["udf_calls"]["mock_llm"], 3);
    assert_eq!(stats["rows_emitted"], 3);
}

/// Collects stdout lines with arrival times on a background thread.
fn timed_lines(child: &mut Child) -> mpsc::Receiver<(Instant, String)> {
    let stdout = child.stdout.take().unwrap();
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if tx.send((Instant::now(), line)).is_err() {
                break;
            }
        }
    });
    rx
}

#[test]
fn rows_stream_before_the_last_call_resolves() {
    let start = Instant::now();
    let mut child = with_traces(&[
        "--mock-llm-delay-ms",
        "100",
        "--concurrency",
        "2",
        "--format",
        "jsonl",
        "SELECT mock_llm(content) AS label FROM traces LIMIT 10",
    ])
    .stdout(Stdio::piped())
    .spawn()
    .unwrap();
    let lines: Vec<(Instant, String)> = timed_lines(&mut child).iter().collect();
    assert!(child.wait().unwrap().success());
    assert_eq!(lines.len(), 10);
    // Ten calls two at a time take five rounds; the first row lands after the first.
    let first = lines[0].0.duration_since(start);
    let last = lines[9].0.duration_since(start);
    assert!(last >= Duration::from_millis(500), "{last:?}");
    assert!(last - first >= Duration::from_millis(300), "first {first:?}, last {last:?}");
}

#[cfg(unix)]
fn interrupt(child: &Child) {
    let status = Command::new("kill").args(["-s", "INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
}

#[cfg(unix)]
#[test]
fn interrupt_cancels_one_shot_query_with_130() {
    let mut child = with_traces(&[
        "--mock-llm-delay-ms",
        "100",
        "--format",
        "jsonl",
        "SELECT mock_llm(content) AS label FROM traces",
    ])
    .stdout(Stdio::piped())
    .stderr(Stdio::piped())
    .spawn()
    .unwrap();
    let lines = timed_lines(&mut child);
    lines.recv_timeout(Duration::from_secs(30)).unwrap();
    interrupt(&child);
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(130));
}

#[cfg(unix)]
#[test]
fn repl_interrupt_keeps_the_session() {
    let mut child = with_traces(&["--mock-llm-delay-ms", "100", "--concurrency", "4", "--format", "jsonl"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let lines = timed_lines(&mut child);
    let mut stdin = child.stdin.take().unwrap();
    writeln!(stdin, "SELECT mock_llm(content) AS label\n  FROM traces;").unwrap();
    stdin.flush().unwrap();
    let mut seen = 0;
    while seen < 3 {
        lines.recv_timeout(Duration::from_secs(30)).unwrap();
        seen += 1;
    }
    interrupt(&child);
    std::thread::sleep(Duration::from_millis(300));
    writeln!(stdin, ".stats\n.tables\nSELECT COUNT(*) AS n FROM traces;\n.quit").unwrap();
    drop(stdin);

    let rest: Vec<String> = lines.iter().map(|(_, l)| l).collect();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("query cancelled"), "{stderr}");

    let rows_before_stats = seen + rest.iter().take_while(|l| l.starts_with("{\"label\"")).count();
    let stats_line = rest.iter().find(|l| l.starts_with("{\"udf_calls\"")).expect("stats line");
    let stats: serde_json::Value = serde_json::from_str(stats_line).unwrap();
    let calls = stats["udf_calls"]["mock_llm"].as_u64().unwrap() as usize;
    assert!(calls <= rows_before_stats + 4, "{calls} calls for {rows_before_stats} rows");
    assert!(rest.contains(&"traces".to_string()));
    assert!(rest.contains(&"{\"n\":10000}".to_string()), "{rest:?}");
}
