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

//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL
//! line for each, and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use bytes::Bytes;
use lakecell::iceberg::{FileContent, IcebergTable, SnapshotSelector};
use lakecell::io::{
    DataSource, FetchHook, FetchLog, FetchRequest, FetchResponse, Method, Purpose, SourceResolver, DEFAULT_TAIL_HINT,
};
use lakecell::parquet::{prune_row_groups, CompareOp, ParquetFile, SimplePredicate};
use lakecell::sql::backend::{IcebergBackend, RowTable};
use lakecell::sql::{Arity, CostClass, DeferredCell, Engine, ExecCtx, Params, SqlError, UdfDef};
use lakecell::value::sql_cmp;
use lakecell::Value;
use lakecell_bench::corpus::generate_rows;
use lakecell_bench::{bench_engine, generate_corpus, run_shape, MockLlmConfig, Shape, TraceCorpusSpec, TraceRow};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use serde_json::Value as Json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

struct Corpus {
    path: PathBuf,
    rows: Vec<TraceRow>,
    _dir: tempfile::TempDir,
}

fn corpus() -> Corpus {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("traces.parquet");
    let rows = generate_corpus(&TraceCorpusSpec::default(), &path).expect("corpus");
    Corpus { path, rows, _dir: dir }
}

fn mock(delay_ms: u64, cap: usize) -> MockLlmConfig {
    MockLlmConfig {
        delay: Duration::from_millis(delay_ms),
        concurrency: cap,
        ..Default::default()
    }
}

async fn shape(c: &Corpus, s: Shape, cap: usize) -> Result<lakecell_bench::ShapeResult, String> {
    let config = mock(5, cap);
    let (engine, _) = bench_engine(&c.path, config).await.map_err(|e| e.to_string())?;
    run_shape(&engine, s, 50, config.delay).await.map_err(|e| e.to_string())
}

// 1
async fn shape_call_counts(c: Arc<Corpus>) -> Outcome {
    let a = shape(&c, Shape::A, 256).await?;
    let cc = shape(&c, Shape::C, 256).await?;
    let d = shape(&c, Shape::D, 256).await?;
    ensure!(a.udf_calls == 50 && a.rows == 50, "shape A: {} calls, {} rows", a.udf_calls, a.rows);
    ensure!(cc.udf_calls == 10_000 && cc.rows == 50, "shape C: {} calls", cc.udf_calls);
    ensure!(d.udf_calls == 50 && d.rows == 50, "shape D: {} calls", d.udf_calls);
    Ok(format!("A={} C={} D={}", a.udf_calls, cc.udf_calls, d.udf_calls))
}

// 2
async fn udf_predicate_bound(c: Arc<Corpus>) -> Outcome {
    let one = shape(&c, Shape::B, 1).await?;
    ensure!(one.udf_calls == 400, "cap 1: {} calls (want 400)", one.udf_calls);
    let wide = shape(&c, Shape::B, 256).await?;
    ensure!(
        wide.udf_calls <= 400 + 255 && wide.rows == 50,
        "cap 256: {} calls exceeds 655",
        wide.udf_calls
    );
    Ok(format!("cap1={} cap256={} (bound 655)", one.udf_calls, wide.udf_calls))
}

// 3
async fn exact_five(c: Arc<Corpus>) -> Outcome {
    let (engine, _) = bench_engine(&c.path, mock(1, 256)).await.map_err(|e| e.to_string())?;
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &c.rows {
        *sizes.entry(r.session_id.as_str()).or_default() += 1;
    }
    let sessions: Vec<&str> = sizes.iter().filter(|(_, n)| **n >= 5).map(|(s, _)| *s).collect();
    ensure!(!sessions.is_empty(), "no session has 5 rows");
    let mut checked = 0;
    for s in sessions.iter().step_by((sessions.len() / 40).max(1)) {
        let params: Params = [("id".to_string(), Value::string(*s))].into();
        let h = engine
            .execute(
                "SELECT llm('classify', content) FROM traces WHERE session_id = $id LIMIT 5",
                &params,
            )
            .map_err(|e| e.to_string())?;
        let stats = h.stats();
        let rows = h.collect().await.map_err(|e| e.to_string())?;
        ensure!(
            rows.len() == 5 && stats.udf_calls("llm") == 5,
            "session {s} ({} rows): {} calls",
            sizes[s],
            stats.udf_calls("llm")
        );
        checked += 1;
    }
    Ok(format!("{checked} sessions, 5 calls each"))
}

// 4
async fn pipelining_ratios(c: Arc<Corpus>) -> Outcome {
    let a = shape(&c, Shape::A, 256).await?;
    let cc = shape(&c, Shape::C, 256).await?;
    let ra = a.sequential_baseline_micros as f64 / a.wall_micros as f64;
    let rc = cc.sequential_baseline_micros as f64 / cc.wall_micros as f64;
    let msg = format!(
        "A {:.1} ms vs {:.0} ms sequential ({ra:.1}x); C {:.1} ms vs {:.0} ms ({rc:.1}x)",
        a.wall_micros as f64 / 1e3,
        a.sequential_baseline_micros as f64 / 1e3,
        cc.wall_micros as f64 / 1e3,
        cc.sequential_baseline_micros as f64 / 1e3
    );
    ensure!(a.wall_micros * 5 < a.sequential_baseline_micros, "shape A under 5x: {msg}");
    ensure!(cc.wall_micros * 20 < cc.sequential_baseline_micros, "shape C under 20x: {msg}");
    Ok(msg)
}

fn sidecars() -> Vec<(String, Json)> {
    let dir = fixtures().join("parquet");
    let mut out: Vec<(String, Json)> = std::fs::read_dir(&dir)
        .expect("fixtures/parquet")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "json").then(|| {
                let doc = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
                (p.file_stem().unwrap().to_string_lossy().into_owned(), doc)
            })
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

async fn open_fixture(name: &str) -> Result<(ParquetFile, Arc<FetchLog>), String> {
    let log = FetchLog::new();
    let src = DataSource::local(fixtures().join("parquet").join(format!("{name}.parquet")), log.clone());
    let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.map_err(|e| format!("{name}: {e}"))?;
    Ok((file, log))
}

fn row_json(names: &[String], row: &[Value]) -> Json {
    Json::Object(names.iter().cloned().zip(row.iter().map(Value::to_canonical_json)).collect())
}

// 5
async fn parquet_oracle() -> Outcome {
    let fixtures = sidecars();
    ensure!(fixtures.len() >= 12, "only {} fixtures", fixtures.len());
    let mut total = 0;
    for (name, doc) in &fixtures {
        let (file, _) = open_fixture(name).await?;
        let rows = file.read_rows(None, None).await.map_err(|e| format!("{name}: {e}"))?;
        let names = file.field_names();
        let expected = doc["rows"].as_array().ok_or("sidecar without rows")?;
        ensure!(rows.len() == expected.len(), "{name}: {} rows, oracle {}", rows.len(), expected.len());
        for (i, (r, e)) in rows.iter().zip(expected).enumerate() {
            ensure!(row_json(&names, r) == *e, "{name} row {i}: {} != {e}", row_json(&names, r));
        }
        total += rows.len();
    }
    Ok(format!("{} fixtures, {total} rows identical", fixtures.len()))
}

fn leaves_of(file: &ParquetFile, field: &str) -> usize {
    let schema = &file.metadata.schema;
    let node = schema.top_level()[schema.top_level_index(field).unwrap()];
    schema.leaves_under(node).len()
}

// 6
async fn footer_protocol() -> Outcome {
    let mut checked = 0;
    for (name, _) in sidecars() {
        let (file, log) = open_fixture(&name).await?;
        let before = log.len();
        ensure!(before <= 2, "{name}: {before} reads before the first column chunk");
        let names = file.field_names();
        let groups = file.metadata.row_groups.len();
        for take in [1, 2.min(names.len()), names.len()] {
            let picked: Vec<&str> = names.iter().take(take).map(String::as_str).collect();
            log.clear();
            file.read_rows(Some(&picked), None).await.map_err(|e| format!("{name}: {e}"))?;
            let k: usize = picked.iter().map(|f| leaves_of(&file, f)).sum();
            let events = log.events();
            let chunks = events.iter().filter(|e| e.purpose == Purpose::ColumnChunk).count();
            ensure!(chunks == k * groups, "{name}: {chunks} chunk fetches for k={k} g={groups}");
            ensure!(
                events.iter().all(|e| e.purpose == Purpose::ColumnChunk && e.range.is_some()),
                "{name}: non-chunk or whole-file read during projection"
            );
        }
        checked += 1;
    }
    // With pruning: only surviving groups are fetched.
    let (file, log) = open_fixture("stats_multi_rowgroup").await?;
    let pred = SimplePredicate::new("x", CompareOp::Lt, Value::Int(300));
    let g = prune_row_groups(&file.metadata, &pred).map_err(|e| e.to_string())?.len();
    log.clear();
    file.read_rows(Some(&["x", "s"]), Some(&pred)).await.map_err(|e| e.to_string())?;
    ensure!(
        log.len() == 2 * g && g < file.metadata.row_groups.len(),
        "pruned projection: {} fetches for 2x{g}",
        log.len()
    );
    Ok(format!("{checked} fixtures; pruned projection fetched 2x{g} chunks"))
}

fn matches(v: &Value, p: &SimplePredicate) -> bool {
    let Some(o) = sql_cmp(v, &p.value) else { return false };
    match p.op {
        CompareOp::Eq => o.is_eq(),
        CompareOp::Lt => o.is_lt(),
        CompareOp::LtEq => o.is_le(),
        CompareOp::Gt => o.is_gt(),
        CompareOp::GtEq => o.is_ge(),
    }
}

fn jitter(v: &Value, rng: &mut impl Rng) -> Value {
    match v {
        Value::Int(i) => Value::Int(i.saturating_add(rng.random_range(-3..=3))),
        Value::Float(x) => Value::Float(x + rng.random_range(-1.0..1.0) * x.abs().max(1.0) * 0.1),
        Value::String(s) if rng.random_bool(0.5) => Value::string(format!("{s}~")),
        Value::String(s) => Value::string(s.chars().take(s.chars().count().saturating_sub(1)).collect::<String>()),
        other => other.clone(),
    }
}

// 7
async fn pruning_soundness() -> Outcome {
    let ops = [CompareOp::Eq, CompareOp::Lt, CompareOp::LtEq, CompareOp::Gt, CompareOp::GtEq];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let (mut fixtures, mut total) = (0, 0);
    for (name, _) in sidecars() {
        let (file, _) = open_fixture(&name).await?;
        let schema = &file.metadata.schema;
        // Columns that are a single top-level primitive leaf carry usable statistics.
        let names = file.field_names();
        let cols: Vec<usize> = (0..names.len())
            .filter(|&i| {
                let node = schema.top_level()[i];
                schema.node(node).is_leaf() && schema.node(node).max_repetition_level == 0
            })
            .collect();
        if cols.is_empty() {
            continue;
        }
        let all = file.read_rows(None, None).await.map_err(|e| format!("{name}: {e}"))?;
        let mut per_group = Vec::new();
        let mut start = 0;
        for rg in &file.metadata.row_groups {
            let n = rg.num_rows as usize;
            per_group.push(&all[start..start + n]);
            start += n;
        }
        let mut done = 0;
        let mut attempts = 0;
        while done < 1000 && attempts < 100_000 {
            attempts += 1;
            let col = cols[rng.random_range(0..cols.len())];
            let sample = &all[rng.random_range(0..all.len())][col];
            if sample.is_null() || matches!(sample, Value::List(_) | Value::Struct(_)) {
                continue;
            }
            let value = if rng.random_bool(0.5) { sample.clone() } else { jitter(sample, &mut rng) };
            let pred = SimplePredicate::new(names[col].clone(), ops[rng.random_range(0..ops.len())], value);
            let expected: Vec<&Vec<Value>> = all.iter().filter(|r| matches(&r[col], &pred)).collect();
            let kept = prune_row_groups(&file.metadata, &pred).map_err(|e| format!("{name}: {e}"))?;
            let got: Vec<&Vec<Value>> = kept
                .iter()
                .flat_map(|&g| per_group[g].iter())
                .filter(|r| matches(&r[col], &pred))
                .collect();
            ensure!(got == expected, "{name}: {pred:?} lost rows after pruning");
            done += 1;
        }
        ensure!(done == 1000, "{name}: only {done} usable predicates");
        fixtures += 1;
        total += done;
    }
    ensure!(fixtures >= 10, "only {fixtures} fixtures had flat columns");
    Ok(format!("{total} predicates over {fixtures} fixtures"))
}

const STORE_PREFIX: &str = "s3://fixture-bucket/warehouse";

/// Serves the committed Iceberg tree as an object store with HEAD and byte ranges.
fn fixture_hook() -> Arc<dyn FetchHook> {
    let root = fixtures().join("iceberg");
    Arc::new(move |req: FetchRequest| {
        let root = root.clone();
        async move {
            let missing = FetchResponse {
                status: 404,
                headers: vec![],
                body: Bytes::new(),
            };
            let Some(key) = req.url.strip_prefix(STORE_PREFIX) else { return Ok(missing) };
            let Ok(data) = std::fs::read(root.join(key.trim_start_matches('/'))) else { return Ok(missing) };
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
                (Method::Get, Some(r)) => FetchResponse {
                    status: 206,
                    headers: vec![],
                    body: data.slice(r.offset as usize..(r.end().min(len)) as usize),
                },
            })
        }
    })
}

fn sorted(mut rows: Vec<Json>) -> Vec<Json> {
    rows.sort_by_key(|r| r.to_string());
    rows
}

// 8
async fn iceberg_end_to_end() -> Outcome {
    let root = fixtures().join("iceberg");
    let index: Json = serde_json::from_str(&std::fs::read_to_string(root.join("index.json")).unwrap()).unwrap();
    let mut snapshots = 0;
    let mut tables = BTreeMap::new();
    for (name, t) in index["tables"].as_object().unwrap() {
        let uri = format!("{STORE_PREFIX}/{}/{}", t["dir"].as_str().unwrap(), t["metadata"].as_str().unwrap());
        let resolver = SourceResolver::new(FetchLog::new()).with_hook(fixture_hook());
        let table = IcebergTable::load(&uri, resolver.clone()).await.map_err(|e| format!("{name}: {e}"))?;
        let oracle: Json = serde_json::from_str(
            &std::fs::read_to_string(root.join("db").join(name).join("oracle.json")).unwrap(),
        )
        .unwrap();
        for snap in oracle["snapshots"].as_array().unwrap() {
            let id = snap["snapshot_id"].as_i64().unwrap();
            let sel = SnapshotSelector::Id(id);
            let names: Vec<String> = table.schema(sel).fields.iter().map(|f| f.name.clone()).collect();
            let rows = table.read_rows(sel).await.map_err(|e| format!("{name}@{id}: {e}"))?;
            let got = sorted(rows.iter().map(|r| row_json(&names, r)).collect());
            let want = sorted(snap["rows"].as_array().unwrap().clone());
            ensure!(got == want, "{name}@{id}: rows differ from oracle");
            snapshots += 1;
        }
        // The same table through SQL (current snapshot).
        let engine = Engine::new();
        engine
            .register_table("t", Arc::new(IcebergBackend::open(&uri, resolver).await.map_err(|e| e.to_string())?))
            .map_err(|e| e.to_string())?;
        let current = oracle["snapshots"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["snapshot_id"] == oracle["current_snapshot_id"]);
        let names: Vec<String> = engine.table("t").unwrap().columns().iter().map(|c| c.name.clone()).collect();
        let sql_rows = engine.query("SELECT * FROM t").await.map_err(|e| format!("{name} via SQL: {e}"))?;
        let got = sorted(sql_rows.iter().map(|r| row_json(&names, r)).collect());
        let want = current.map_or(vec![], |s| sorted(s["rows"].as_array().unwrap().clone()));
        ensure!(got == want, "{name}: SQL read differs from oracle");
        tables.insert(name.clone(), table);
    }

    // Equality delete at the same sequence number as the data file: not applied.
    let plan = tables["eqdel"].plan(SnapshotSelector::Current).await.map_err(|e| e.to_string())?;
    let c = plan
        .tasks
        .iter()
        .find(|t| t.data_file.file_path.ends_with("data-c.parquet"))
        .ok_or("eqdel: data-c missing")?;
    let eq_seq = plan
        .tasks
        .iter()
        .flat_map(|t| &t.deletes)
        .find(|d| d.content == FileContent::EqualityDeletes)
        .map(|d| d.data_sequence_number)
        .ok_or("eqdel: no equality delete planned")?;
    ensure!(
        c.deletes.is_empty() && eq_seq == c.data_file.data_sequence_number,
        "eqdel: equal-sequence equality delete was paired"
    );
    // Position delete at the same sequence number: applied.
    let plan = tables["mixed"].plan(SnapshotSelector::Current).await.map_err(|e| e.to_string())?;
    let d = plan
        .tasks
        .iter()
        .find(|t| t.data_file.file_path.ends_with("data-d.parquet"))
        .ok_or("mixed: data-d missing")?;
    ensure!(
        d.deletes.iter().any(|x| x.content == FileContent::PositionDeletes
            && x.data_sequence_number == d.data_file.data_sequence_number),
        "mixed: equal-sequence position delete not paired"
    );
    Ok(format!("{} tables, {snapshots} snapshots; sequence asymmetry holds", tables.len()))
}

// 9
fn memo_and_cancel() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let mut runner = TestRunner::new(cases(128));
    runner
        .run(&(2usize..=10), |k| {
            let runs = Arc::new(AtomicUsize::new(0));
            let r = runs.clone();
            let cell = DeferredCell::new(CostClass::Inference, move |_| async move {
                r.fetch_add(1, Ordering::SeqCst);
                tokio::time::sleep(Duration::from_micros(100)).await;
                Ok(Value::Int(1))
            });
            let ctx = ExecCtx::new();
            rt.block_on(async {
                let forces: Vec<_> = (0..k).map(|_| cell.force(&ctx)).collect();
                for f in forces {
                    assert_eq!(f.await, Ok(Value::Int(1)));
                }
                assert_eq!(cell.force(&ctx).await, Ok(Value::Int(1)));
            });
            if runs.load(Ordering::SeqCst) != 1 {
                return Err(TestCaseError::fail(format!("k={k}: thunk ran {} times", runs.load(Ordering::SeqCst))));
            }
            Ok(())
        })
        .map_err(|e| format!("memoization: {e}"))?;

    let mut runner = TestRunner::new(cases(128));
    runner
        .run(&(0usize..40, 1usize..32, 0u64..300), |(m, cap, delay_us)| {
            let engine = Engine::new();
            let rows = (0..300).map(|i| vec![Value::Int(i)]).collect();
            engine
                .register_table("t", Arc::new(RowTable::new(vec!["id".into()], rows)))
                .unwrap();
            engine
                .register_udf(
                    UdfDef::asynchronous("work", Arity::Exact(1), move |a| async move {
                        tokio::time::sleep(Duration::from_micros(delay_us)).await;
                        Ok(a[0].clone())
                    })
                    .with_concurrency_cap(cap),
                )
                .unwrap();
            let calls = rt.block_on(async {
                let mut h = engine.execute("SELECT work(id) FROM t", &Params::new()).unwrap();
                for _ in 0..m {
                    h.next().await.unwrap().unwrap();
                }
                h.cancel();
                assert!(matches!(h.next().await, Some(Err(SqlError::Cancelled))));
                tokio::time::sleep(Duration::from_millis(2)).await;
                h.stats().total_udf_calls() as usize
            });
            if calls > m + cap {
                return Err(TestCaseError::fail(format!("m={m} cap={cap}: {calls} calls")));
            }
            Ok(())
        })
        .map_err(|e| format!("cancellation: {e}"))?;
    Ok("128 memoization cases, 128 cancellation cases".into())
}

// 10
async fn first_row_from_one_group(c: Arc<Corpus>) -> Outcome {
    let (engine, log) = bench_engine(&c.path, mock(5, 256)).await.map_err(|e| e.to_string())?;
    let meta = ParquetFile::open(DataSource::local(&c.path, FetchLog::new()), DEFAULT_TAIL_HINT)
        .await
        .map_err(|e| e.to_string())?
        .metadata;
    ensure!(meta.row_groups.len() >= 4, "corpus has {} row groups", meta.row_groups.len());
    let group_of = |offset: u64| {
        meta.row_groups
            .iter()
            .position(|rg| rg.columns.iter().any(|col| col.byte_range().offset == offset))
    };
    for (sql, k) in [
        ("SELECT session_id FROM traces LIMIT 1", 1),
        ("SELECT session_id, tool FROM traces LIMIT 1", 2),
        ("SELECT mock_llm(content) FROM traces LIMIT 1", 1),
    ] {
        log.clear();
        let rows = engine.query(sql).await.map_err(|e| e.to_string())?;
        ensure!(rows.len() == 1, "{sql}: {} rows", rows.len());
        let chunks: Vec<_> = log.events().into_iter().filter(|e| e.purpose == Purpose::ColumnChunk).collect();
        let groups: BTreeSet<Option<usize>> = chunks.iter().map(|e| group_of(e.range.unwrap().offset)).collect();
        ensure!(
            chunks.len() <= k && groups.len() == 1,
            "{sql}: {} chunk fetches across {} row groups",
            chunks.len(),
            groups.len()
        );
    }
    Ok(format!("LIMIT 1 touched one of {} row groups", meta.row_groups.len()))
}

// 11
async fn error_surface(c: Arc<Corpus>) -> Outcome {
    let (engine, _) = bench_engine(&c.path, mock(0, 256)).await.map_err(|e| e.to_string())?;
    let e = engine.query("SELECT lenght(content) FROM traces").await.err().ok_or("lenght accepted")?;
    ensure!(e.to_string().contains("length"), "no suggestion: {e}");
    let e = engine.query("SELECT bogus FROM traces").await.err().ok_or("bogus accepted")?;
    for col in ["session_id", "turn", "tool", "content", "is_error"] {
        ensure!(e.to_string().contains(col), "column {col} missing from: {e}");
    }
    Ok("suggestion and column list present".into())
}

fn run<F: Future<Output = Outcome> + Send + 'static>(rt: &tokio::runtime::Runtime, f: F) -> Outcome {
    match rt.block_on(async { tokio::spawn(f).await }) {
        Ok(o) => o,
        Err(e) => Err(format!("panicked: {e}")),
    }
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap();
    let c = Arc::new(corpus());
    assert_eq!(c.rows, generate_rows(&TraceCorpusSpec::default()), "corpus is deterministic");

    let results: Vec<(&str, Outcome)> = vec![
        ("shape call counts (A, C, D at N=50)", run(&rt, shape_call_counts(c.clone()))),
        ("udf predicate scan bound (shape B)", run(&rt, udf_predicate_bound(c.clone()))),
        ("exact-five per session", run(&rt, exact_five(c.clone()))),
        ("pipelining ratios", run(&rt, pipelining_ratios(c.clone()))),
        ("parquet oracle equivalence", run(&rt, parquet_oracle())),
        ("footer protocol and chunk accounting", run(&rt, footer_protocol())),
        ("pruning soundness", run(&rt, pruning_soundness())),
        ("iceberg end-to-end", run(&rt, iceberg_end_to_end())),
        (
            "memoization and cancellation properties",
            std::thread::spawn(memo_and_cancel)
                .join()
                .unwrap_or_else(|_| Err("panicked".into())),
        ),
        ("first row from one row group", run(&rt, first_row_from_one_group(c.clone()))),
        ("error surface", run(&rt, error_surface(c.clone()))),
    ];

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn cases(n: u32) -> Config {
    Config {
        cases: n,
        failure_persistence: None,
        ..Config::default()
    }
}
