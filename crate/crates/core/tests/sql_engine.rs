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

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use lakecell::io::{DataSource, FetchLog, Purpose};
use lakecell::sql::backend::{IcebergBackend, ParquetBackend, RowTable};
use lakecell::sql::{
    Arity, CostClass, Engine, ErrorMode, ExecPath, Params, QueryOptions, SqlError, UdfDef,
};
use lakecell::Value;

fn s(x: &str) -> Value {
    Value::string(x)
}

/// `t(id, grp, v, name)`: ids 0..n, grp = id % 3, v NULL on every 5th row.
fn numbers(n: i64) -> RowTable {
    let rows = (0..n)
        .map(|i| {
            vec![
                Value::Int(i),
                s(["a", "b", "c"][(i % 3) as usize]),
                if i % 5 == 4 { Value::Null } else { Value::Int(i * 10) },
                s(&format!("row{i}")),
            ]
        })
        .collect();
    RowTable::new(vec!["id".into(), "grp".into(), "v".into(), "name".into()], rows)
}

/// Async UDF returning `arg % 8`, counting calls in `stats`.
fn modulo_udf(delay_ms: u64) -> UdfDef {
    UdfDef::asynchronous("slow_mod", Arity::Exact(1), move |args| async move {
        tokio::time::sleep(Duration::from_millis(delay_ms)).await;
        match &args[0] {
            Value::Int(i) => Ok(Value::Int(i % 8)),
            other => Err(format!("expected int, got {other}")),
        }
    })
}

fn engine(n: i64) -> Engine {
    let e = Engine::new();
    e.register_table("t", Arc::new(numbers(n))).unwrap();
    e
}

async fn rows(e: &Engine, sql: &str) -> Vec<Vec<Value>> {
    e.query(sql).await.unwrap_or_else(|err| panic!("{sql}: {err}"))
}

#[tokio::test]
async fn projection_filter_and_limit() {
    let e = engine(20);
    let r = rows(&e, "SELECT id, name FROM t WHERE id >= 3 AND grp = 'a' LIMIT 2").await;
    assert_eq!(r, vec![vec![Value::Int(3), s("row3")], vec![Value::Int(6), s("row6")]]);
    let r = rows(&e, "SELECT id FROM t LIMIT 2 OFFSET 18").await;
    assert_eq!(r, vec![vec![Value::Int(18)], vec![Value::Int(19)]]);
    let r = rows(&e, "select 1 + 2 * 3, 'x' || 'y', 7 / 2").await;
    assert_eq!(r, vec![vec![Value::Int(7), s("xy"), Value::Float(3.5)]]);
}

#[tokio::test]
async fn dialect_quoting_variants() {
    let e = engine(5);
    let a = rows(&e, "SELECT \"id\", `name` FROM t WHERE name = \"row2\"").await;
    assert_eq!(a, vec![vec![Value::Int(2), s("row2")]]);
    let err = e.query("SeLeCt id FROM t wHeRe id = $id").await.unwrap_err();
    assert!(err.to_string().contains("$id"), "{err}");
    let params: Params = [("id".to_string(), Value::Int(3))].into();
    let c = e.execute("SELECT name FROM t WHERE id = $id", &params).unwrap().collect().await.unwrap();
    assert_eq!(c, vec![vec![s("row3")]]);
}

#[tokio::test]
async fn three_valued_logic_filters_nulls() {
    let e = engine(10);
    // v is NULL for ids 4 and 9: neither `v > 0` nor `NOT (v > 0)` keeps them.
    let pos = rows(&e, "SELECT id FROM t WHERE v > 0").await.len();
    let neg = rows(&e, "SELECT id FROM t WHERE NOT (v > 0)").await.len();
    assert_eq!(pos + neg, 8);
    let r = rows(&e, "SELECT id FROM t WHERE v IS NULL OR id = 0").await;
    assert_eq!(r, vec![vec![Value::Int(0)], vec![Value::Int(4)], vec![Value::Int(9)]]);
    // NULL OR TRUE is TRUE, NULL AND FALSE is FALSE.
    let r = rows(&e, "SELECT (NULL OR TRUE), (NULL AND FALSE), (NULL AND TRUE)").await;
    assert_eq!(r, vec![vec![Value::Boolean(true), Value::Boolean(false), Value::Null]]);
}

#[tokio::test]
async fn order_by_puts_nulls_last_and_is_stable() {
    let e = engine(10);
    let asc = rows(&e, "SELECT id FROM t ORDER BY v").await;
    let ids: Vec<i64> = asc.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![0, 1, 2, 3, 5, 6, 7, 8, 4, 9]);
    let desc = rows(&e, "SELECT id FROM t ORDER BY v DESC").await;
    let ids: Vec<i64> = desc.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![8, 7, 6, 5, 3, 2, 1, 0, 4, 9]);
    // Ties keep scan order.
    let by_grp = rows(&e, "SELECT id, grp FROM t ORDER BY grp DESC").await;
    let ids: Vec<i64> = by_grp.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![2, 5, 8, 1, 4, 7, 0, 3, 6, 9]);
    let by_ordinal = rows(&e, "SELECT name AS n, id FROM t ORDER BY 2 DESC LIMIT 1").await;
    assert_eq!(by_ordinal, vec![vec![s("row9"), Value::Int(9)]]);
    let by_alias = rows(&e, "SELECT id * -1 AS neg FROM t ORDER BY neg LIMIT 1").await;
    assert_eq!(by_alias, vec![vec![Value::Int(-9)]]);
}

#[tokio::test]
async fn grouping_and_aggregates() {
    let e = engine(10);
    let r = rows(
        &e,
        "SELECT grp, COUNT(*), COUNT(v), SUM(v), MIN(id), MAX(name), AVG(id) FROM t GROUP BY grp ORDER BY grp",
    )
    .await;
    assert_eq!(
        r[0],
        vec![
            s("a"),
            Value::Int(4),
            Value::Int(3),
            Value::Int(0 + 30 + 60),
            Value::Int(0),
            s("row9"),
            Value::Float(4.5)
        ]
    );
    assert_eq!(r.len(), 3);
    let r = rows(&e, "SELECT COUNT(*), SUM(v) FROM t WHERE id > 100").await;
    assert_eq!(r, vec![vec![Value::Int(0), Value::Null]]);
    let r = rows(&e, "SELECT grp, COUNT(*) AS c FROM t GROUP BY grp HAVING COUNT(*) > 3").await;
    assert_eq!(r, vec![vec![s("a"), Value::Int(4)]]);
    let r = rows(&e, "SELECT COUNT(DISTINCT grp), COUNT(*) + 1 FROM t").await;
    assert_eq!(r, vec![vec![Value::Int(3), Value::Int(11)]]);
    let r = rows(&e, "SELECT DISTINCT grp FROM t ORDER BY grp DESC").await;
    assert_eq!(r, vec![vec![s("c")], vec![s("b")], vec![s("a")]]);
    let err = e.query("SELECT grp, id FROM t GROUP BY grp").await.unwrap_err();
    assert!(err.to_string().contains("GROUP BY"), "{err}");
}

#[tokio::test]
async fn string_number_comparison_is_a_type_error() {
    let e = engine(3);
    let err = e.query("SELECT id FROM t WHERE name > 5").await.unwrap_err();
    assert!(matches!(err, SqlError::Type(_)), "{err:?}");
    let ok = rows(&e, "SELECT id FROM t WHERE id = 1.0").await;
    assert_eq!(ok, vec![vec![Value::Int(1)]]);
    let ok = rows(&e, "SELECT id FROM t WHERE CAST(name AS TEXT) = 'row2'").await;
    assert_eq!(ok.len(), 1);
}

#[tokio::test]
async fn plan_paths_follow_the_buffering_rule() {
    let e = engine(5);
    e.register_udf(modulo_udf(0)).unwrap();
    let p = |sql: &str| e.plan(sql).unwrap().path;
    assert_eq!(p("SELECT id FROM t LIMIT 3"), ExecPath::Streaming);
    assert_eq!(p("SELECT slow_mod(id) FROM t WHERE id > 1 LIMIT 3"), ExecPath::Streaming);
    assert_eq!(p("SELECT id FROM t ORDER BY slow_mod(id) LIMIT 50"), ExecPath::Buffered);
    assert_eq!(p("SELECT grp FROM t GROUP BY grp"), ExecPath::Buffered);
    assert_eq!(p("SELECT COUNT(*) FROM t"), ExecPath::Buffered);
    assert_eq!(p("SELECT DISTINCT grp FROM t"), ExecPath::Buffered);
    assert!(e.plan("SELECT id FROM t WHERE id = $x").unwrap().explain().contains("Filter"));
}

#[tokio::test]
async fn error_surface_carries_hints() {
    let e = engine(3);
    let err = e.query("SELECT lenght(name) FROM t").await.unwrap_err();
    assert!(matches!(err, SqlError::UnknownFunction { .. }));
    assert!(err.to_string().contains("length"), "{err}");

    let err = e.query("SELECT bogus FROM t").await.unwrap_err();
    for col in ["id", "grp", "v", "name"] {
        assert!(err.to_string().contains(col), "{err}");
    }
    let err = e.query("SELECT nme FROM t").await.unwrap_err();
    assert!(err.to_string().contains("did you mean 'name'"), "{err}");

    let err = e.query("SELECT * FROM nowhere").await.unwrap_err();
    assert!(matches!(err, SqlError::UnknownTable { .. }));
    assert!(err.to_string().contains("t"), "{err}");

    let err = e.query("SELECT id FROM t WHERE").await.unwrap_err();
    assert!(matches!(err, SqlError::Syntax { .. }), "{err:?}");

    assert!(matches!(
        e.register_table("T", Arc::new(numbers(1))),
        Err(SqlError::DuplicateName(_))
    ));
    e.register_udf(modulo_udf(0)).unwrap();
    assert!(matches!(e.register_udf(modulo_udf(0)), Err(SqlError::DuplicateName(_))));
}

#[tokio::test]
async fn joins_inner_and_left() {
    let e = engine(6);
    let labels = RowTable::new(
        vec!["g".into(), "label".into()],
        vec![vec![s("a"), s("alpha")], vec![s("b"), s("beta")], vec![Value::Null, s("none")]],
    );
    e.register_table("labels", Arc::new(labels)).unwrap();
    let r = rows(&e, "SELECT t.id, l.label FROM t JOIN labels l ON t.grp = l.g ORDER BY t.id").await;
    let ids: Vec<i64> = r.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![0, 1, 3, 4]);
    let r = rows(&e, "SELECT id, label FROM t LEFT JOIN labels ON grp = g").await;
    assert_eq!(r.len(), 6);
    assert_eq!(r[2], vec![Value::Int(2), Value::Null]);
    let err = e.query("SELECT id FROM t JOIN labels ON id > 1").await.unwrap_err();
    assert!(matches!(err, SqlError::Bind { .. }));
}

#[tokio::test]
async fn error_mode_null_degrades_failed_udf_cells() {
    let e = engine(4);
    e.register_udf(modulo_udf(0)).unwrap();
    let sql = "SELECT slow_mod(name) FROM t";
    assert!(matches!(e.query(sql).await, Err(SqlError::Udf { .. })));
    let options = QueryOptions {
        error_mode: ErrorMode::Null,
        ..Default::default()
    };
    let mut h = e.execute_with(sql, &Params::new(), options).unwrap();
    let mut n = 0;
    while let Some(row) = h.next().await {
        assert_eq!(row.unwrap(), vec![Value::Null]);
        n += 1;
    }
    assert_eq!(n, 4);
    assert_eq!(h.stats().snapshot().warnings, 4);
}

#[tokio::test]
async fn buffered_row_ceiling_aborts() {
    let e = engine(50);
    let options = QueryOptions {
        max_buffered_rows: 10,
        ..Default::default()
    };
    let h = e.execute_with("SELECT id FROM t ORDER BY v", &Params::new(), options).unwrap();
    assert!(matches!(h.collect().await, Err(SqlError::ResourceExceeded(_))));
}

// ---- UDF call accounting -------------------------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn limit_bounds_udf_calls_exactly() {
    let e = engine(1000);
    e.register_udf(modulo_udf(1)).unwrap();
    let h = e.execute("SELECT slow_mod(id) FROM t LIMIT 50", &Params::new()).unwrap();
    let stats = h.stats();
    let out = h.collect().await.unwrap();
    assert_eq!(out.len(), 50);
    assert_eq!(stats.udf_calls("slow_mod"), 50);

    // Native predicate, UDF only in the projection.
    let h = e
        .execute("SELECT slow_mod(id) FROM t WHERE grp = 'b' LIMIT 50", &Params::new())
        .unwrap();
    let stats = h.stats();
    h.collect().await.unwrap();
    assert_eq!(stats.udf_calls("slow_mod"), 50);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn udf_predicate_scan_depth_at_cap_one_is_exact() {
    let e = engine(1000);
    e.register_udf(modulo_udf(0).with_concurrency_cap(1)).unwrap();
    let h = e
        .execute("SELECT id FROM t WHERE slow_mod(id) = 7 LIMIT 50", &Params::new())
        .unwrap();
    let stats = h.stats();
    let out = h.collect().await.unwrap();
    assert_eq!(out.len(), 50);
    assert_eq!(stats.udf_calls("slow_mod"), 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn udf_predicate_overshoot_is_bounded_by_the_cap() {
    let e = engine(2000);
    e.register_udf(modulo_udf(1).with_concurrency_cap(32)).unwrap();
    let h = e
        .execute("SELECT id FROM t WHERE slow_mod(id) = 7 LIMIT 50", &Params::new())
        .unwrap();
    let stats = h.stats();
    h.collect().await.unwrap();
    let calls = stats.udf_calls("slow_mod");
    assert!((400..400 + 32).contains(&calls), "{calls}");
    let snap = stats.snapshot();
    assert!(snap.buffered_peak_rows <= 32 + 4, "{}", snap.buffered_peak_rows);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sort_by_udf_calls_once_per_row() {
    let e = engine(600);
    e.register_udf(modulo_udf(1)).unwrap();
    let h = e
        .execute("SELECT id FROM t ORDER BY slow_mod(id) DESC, id LIMIT 5", &Params::new())
        .unwrap();
    let stats = h.stats();
    let out = h.collect().await.unwrap();
    assert_eq!(stats.udf_calls("slow_mod"), 600);
    let ids: Vec<i64> = out.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(ids, vec![7, 15, 23, 31, 39]);

    // The same UDF expression in two places is one cell per row.
    let h = e
        .execute("SELECT slow_mod(id) FROM t ORDER BY slow_mod(id) LIMIT 5", &Params::new())
        .unwrap();
    let stats = h.stats();
    h.collect().await.unwrap();
    assert_eq!(stats.udf_calls("slow_mod"), 600);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn exact_five_for_a_parameterised_session() {
    let e = engine(500);
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    e.register_udf(UdfDef::asynchronous("llm", Arity::AtLeast(1), move |args| {
        c.fetch_add(1, Ordering::SeqCst);
        async move { Ok(Value::string(format!("{}:{}", args[0], args.len()))) }
    }))
    .unwrap();
    let params: Params = [("id".to_string(), s("b"))].into();
    let h = e
        .execute("SELECT llm('classify', name) FROM t WHERE grp = $id LIMIT 5", &params)
        .unwrap();
    let stats = h.stats();
    assert_eq!(h.collect().await.unwrap().len(), 5);
    assert_eq!(stats.udf_calls("llm"), 5);
    assert_eq!(calls.load(Ordering::SeqCst), 5);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn output_order_survives_out_of_order_completion() {
    let e = engine(300);
    // Later rows finish first.
    e.register_udf(UdfDef::asynchronous("rev_sleep", Arity::Exact(1), |args| async move {
        let i = args[0].as_i64().unwrap();
        tokio::time::sleep(Duration::from_micros(((300 - i) * 30) as u64)).await;
        Ok(Value::Int(i))
    }))
    .unwrap();
    let out = rows(&e, "SELECT rev_sleep(id) FROM t").await;
    let got: Vec<i64> = out.iter().map(|r| r[0].as_i64().unwrap()).collect();
    assert_eq!(got, (0..300).collect::<Vec<_>>());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn cancel_before_first_pull_runs_nothing() {
    let e = engine(100);
    e.register_udf(modulo_udf(1)).unwrap();
    let mut h = e.execute("SELECT slow_mod(id) FROM t", &Params::new()).unwrap();
    h.cancel();
    assert!(matches!(h.next().await, Some(Err(SqlError::Cancelled))));
    assert!(h.next().await.is_none());
    assert_eq!(h.stats().total_udf_calls(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn cancel_after_rows_at_cap_one() {
    let e = engine(10_000);
    e.register_udf(modulo_udf(1).with_concurrency_cap(1)).unwrap();
    let mut h = e.execute("SELECT slow_mod(id) FROM t", &Params::new()).unwrap();
    for _ in 0..10 {
        h.next().await.unwrap().unwrap();
    }
    h.cancel();
    assert!(matches!(h.next().await, Some(Err(SqlError::Cancelled))));
    tokio::time::sleep(Duration::from_millis(20)).await;
    assert!(h.stats().total_udf_calls() <= 11);
}

// ---- Scan laziness over Parquet --------------------------------------------

fn parquet_fixture(name: &str) -> (ParquetBackend, Arc<FetchLog>) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/parquet")
        .join(name);
    let log = FetchLog::new();
    let rt = tokio::runtime::Handle::current();
    let source = DataSource::local(path, log.clone());
    let backend = tokio::task::block_in_place(|| rt.block_on(ParquetBackend::open(source))).unwrap();
    (backend, log)
}

fn chunk_events(log: &FetchLog) -> usize {
    log.events().iter().filter(|e| e.purpose == Purpose::ColumnChunk).count()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn count_star_forces_no_value_cells() {
    let (backend, log) = parquet_fixture("stats_multi_rowgroup.parquet");
    let e = Engine::new();
    e.register_table("p", Arc::new(backend)).unwrap();
    let h = e.execute("SELECT COUNT(*) FROM p", &Params::new()).unwrap();
    let stats = h.stats();
    assert_eq!(h.collect().await.unwrap(), vec![vec![Value::Int(1000)]]);
    assert_eq!(stats.cells_forced(CostClass::Cheap), 0);
    assert_eq!(stats.cells_forced(CostClass::Io), 0);
    assert_eq!(chunk_events(&log), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unread_columns_are_never_fetched() {
    let (backend, log) = parquet_fixture("stats_multi_rowgroup.parquet");
    let e = Engine::new();
    e.register_table("p", Arc::new(backend)).unwrap();
    log.clear();
    let out = rows(&e, "SELECT x FROM p").await;
    assert_eq!(out.len(), 1000);
    let events = log.events();
    assert_eq!(chunk_events(&log), 10, "one chunk per row group for one column");
    assert!(events.iter().all(|ev| ev.purpose != Purpose::Footer && ev.purpose != Purpose::Tail));

    log.clear();
    let out = rows(&e, "SELECT s FROM p LIMIT 1").await;
    assert_eq!(out.len(), 1);
    assert_eq!(chunk_events(&log), 1, "first row needs one row group's chunk");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pushdown_prunes_row_groups_without_changing_results() {
    let (backend, log) = parquet_fixture("stats_multi_rowgroup.parquet");
    let e = Engine::new();
    e.register_table("p", Arc::new(backend)).unwrap();
    let plan = e.plan("SELECT d FROM p WHERE x < 50").unwrap().explain();
    assert!(plan.contains("pushdown"), "{plan}");
    log.clear();
    let pruned = rows(&e, "SELECT d FROM p WHERE x < 50").await;
    let pruned_events = chunk_events(&log);
    let unpruned = rows(&e, "SELECT d FROM p WHERE x + 0 < 50").await;
    assert_eq!(pruned, unpruned);
    assert!(pruned_events < 20, "{pruned_events}");
}

// ---- Heterogeneous join ------------------------------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn iceberg_joins_jsonl_like_a_nested_loop() {
    let (resolver, _log) = common::fixture_resolver();
    let tables = common::fixture_tables();
    let uri = &tables.iter().find(|(n, _)| n == "plain").unwrap().1;
    let e = Engine::new();
    e.register_table("ice", Arc::new(IcebergBackend::open(uri, resolver).await.unwrap()))
        .unwrap();
    let jsonl = b"{\"category\": \"a\", \"weight\": 1}\n{\"category\": \"c\", \"weight\": 3}\n{\"category\": \"c\", \"weight\": 4}\n{\"category\": null, \"weight\": 9}\n";
    let side = RowTable::from_jsonl(jsonl).unwrap();
    let side_rows = side.rows().to_vec();
    e.register_table("w", Arc::new(side)).unwrap();

    let got = rows(
        &e,
        "SELECT i.id, i.amount, w.weight FROM ice i JOIN w ON i.category = w.category ORDER BY 1, 3",
    )
    .await;

    let oracle = common::oracle("plain");
    let current = oracle["snapshots"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["snapshot_id"] == oracle["current_snapshot_id"])
        .unwrap();
    let mut expected = Vec::new();
    for l in current["rows"].as_array().unwrap() {
        for r in &side_rows {
            let (lc, rc) = (l["category"].as_str(), r[0].as_str());
            if lc.is_some() && lc == rc {
                expected.push(vec![
                    Value::Int(l["id"].as_i64().unwrap()),
                    Value::Float(l["amount"].as_f64().unwrap()),
                    r[1].clone(),
                ]);
            }
        }
    }
    expected.sort_by(|a, b| lakecell::value::key_cmp(&a[0], &b[0]).then(lakecell::value::key_cmp(&a[2], &b[2])));
    assert_eq!(got, expected);
    assert_eq!(got.len(), 7);
}
