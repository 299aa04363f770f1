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

//! Reader output checked against the JSON sidecars written next to each fixture
//! by the reference writer.

use std::path::{Path, PathBuf};

use lakecell::io::{DataSource, FetchLog, Purpose, DEFAULT_TAIL_HINT};
use lakecell::parquet::{
    prune_row_groups, read_column_chunk, read_footer, CompareOp, FileMetadata, ParquetError, ParquetFile,
    SimplePredicate,
};
use lakecell::value::sql_cmp;
use lakecell::Value;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as Json};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/parquet")
}

fn sidecars() -> Vec<(String, Json)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let doc = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
            out.push((name, doc));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(out.len() >= 14, "fixture sidecars missing; run fixtures/generate_fixtures.py");
    out
}

fn source(name: &str) -> (DataSource, std::sync::Arc<FetchLog>) {
    let log = FetchLog::new();
    (DataSource::local(fixture_dir().join(format!("{name}.parquet")), log.clone()), log)
}

fn metadata_json(meta: &FileMetadata) -> Json {
    let schema = &meta.schema;
    let leaves: Vec<Json> = (0..schema.num_columns())
        .map(|i| {
            let l = schema.leaf(i);
            json!({
                "path": l.path.join("."),
                "physical_type": l.physical.unwrap().name(),
                "max_definition_level": l.max_definition_level,
                "max_repetition_level": l.max_repetition_level,
            })
        })
        .collect();
    let stat = |v: &Option<Value>| v.as_ref().map_or(Json::Null, Value::to_canonical_json);
    let row_groups: Vec<Json> = meta
        .row_groups
        .iter()
        .map(|rg| {
            json!({
                "num_rows": rg.num_rows,
                "columns": rg.columns.iter().map(|c| json!({
                    "path": c.path.join("."),
                    "codec": c.codec.name(),
                    "data_page_offset": c.data_page_offset,
                    "dictionary_page_offset": c.dictionary_page_offset,
                    "total_compressed_size": c.total_compressed_size,
                    "num_values": c.num_values,
                    "statistics": c.statistics.as_ref().map(|s| json!({
                        "min": stat(&s.min),
                        "max": stat(&s.max),
                        "null_count": s.null_count,
                    })),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "num_rows": meta.num_rows,
        "created_by": meta.created_by,
        "top_level_columns": schema.top_level().iter().map(|&n| schema.node(n).name.clone()).collect::<Vec<_>>(),
        "leaves": leaves,
        "row_groups": row_groups,
    })
}

/// The reference tooling hides a statistics struct that carries only a null
/// count (no min/max). Mirror that on our side before comparing.
fn hide_count_only_stats(mut actual: Json) -> Json {
    for rg in actual["row_groups"].as_array_mut().unwrap() {
        for col in rg["columns"].as_array_mut().unwrap() {
            let stats = &col["statistics"];
            if !stats.is_null() && stats["min"].is_null() && stats["max"].is_null() {
                col["statistics"] = Json::Null;
            }
        }
    }
    actual
}

#[tokio::test]
async fn footer_metadata_matches_reference_dump() {
    for (name, doc) in sidecars() {
        let (src, log) = source(&name);
        let meta = read_footer(&src, DEFAULT_TAIL_HINT).await.unwrap_or_else(|e| panic!("{name}: {e}"));
        let actual = hide_count_only_stats(metadata_json(&meta));
        let expected = doc["metadata"].clone();
        for (g, (a, e)) in actual["row_groups"]
            .as_array()
            .unwrap()
            .iter()
            .zip(expected["row_groups"].as_array().unwrap())
            .enumerate()
        {
            for (c, (ac, ec)) in a["columns"].as_array().unwrap().iter().zip(e["columns"].as_array().unwrap()).enumerate() {
                assert_eq!(ac, ec, "{name}: row group {g} column {c}");
            }
        }
        assert_eq!(actual, expected, "{name}: metadata differs");
        assert!(log.len() <= 2, "{name}: {} footer reads", log.len());
    }
}

#[tokio::test]
async fn full_reads_match_reference_rows() {
    for (name, doc) in sidecars() {
        let (src, log) = source(&name);
        let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.unwrap();
        let footer_reads = log.len();
        assert!(footer_reads <= 2, "{name}");
        let rows = file.read_rows(None, None).await.unwrap_or_else(|e| panic!("{name}: {e}"));
        let names = file.field_names();
        let actual: Vec<Json> = rows
            .iter()
            .map(|r| {
                Json::Object(
                    names
                        .iter()
                        .cloned()
                        .zip(r.iter().map(Value::to_canonical_json))
                        .collect(),
                )
            })
            .collect();
        let expected = doc["rows"].as_array().unwrap();
        assert_eq!(actual.len(), expected.len(), "{name}: row count");
        for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
            assert_eq!(a, e, "{name}: row {i}");
        }
        // Exactly one chunk read per (row group, leaf).
        let meta = &file.metadata;
        let chunk_reads = log.events().iter().filter(|e| e.purpose == Purpose::ColumnChunk).count();
        assert_eq!(chunk_reads, meta.row_groups.len() * meta.schema.num_columns(), "{name}");
    }
}

#[tokio::test]
async fn decoded_columns_satisfy_level_invariant() {
    for (name, _) in sidecars() {
        let (src, _) = source(&name);
        let meta = read_footer(&src, DEFAULT_TAIL_HINT).await.unwrap();
        for rg in &meta.row_groups {
            for c in &rg.columns {
                let col = read_column_chunk(&src, c, meta.schema.leaf(c.column)).await.unwrap();
                assert!(col.check_invariant(), "{name} {}", c.path.join("."));
                assert_eq!(col.len() as i64, c.num_values);
            }
        }
    }
}

#[tokio::test]
async fn wide_footer_takes_a_second_read() {
    let (src, log) = source("wide_2000_columns");
    let meta = read_footer(&src, 4096).await.unwrap();
    assert_eq!(meta.schema.num_columns(), 2000);
    let purposes: Vec<Purpose> = log.events().iter().map(|e| e.purpose).collect();
    assert_eq!(purposes, [Purpose::Tail, Purpose::Footer]);
}

#[tokio::test]
async fn dictionary_chunk_is_one_range_read() {
    let (src, log) = source("flat_dict_snappy");
    let meta = read_footer(&src, DEFAULT_TAIL_HINT).await.unwrap();
    log.clear();
    let tool = meta.schema.column_by_path(&["tool"]).unwrap();
    let chunk = &meta.row_groups[0].columns[tool];
    assert!(chunk.dictionary_page_offset.is_some());
    let col = read_column_chunk(&src, chunk, meta.schema.leaf(tool)).await.unwrap();
    assert_eq!(col.values.len(), 100);
    let events = log.events();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].purpose, Purpose::ColumnChunk);
    assert_eq!(events[0].bytes_returned, chunk.total_compressed_size as u64);
}

#[tokio::test]
async fn all_null_row_group_has_no_values() {
    let (src, _) = source("optional_nulls_pages");
    let meta = read_footer(&src, DEFAULT_TAIL_HINT).await.unwrap();
    let maybe = meta.schema.column_by_path(&["maybe"]).unwrap();
    let col = read_column_chunk(&src, &meta.row_groups[0].columns[maybe], meta.schema.leaf(maybe))
        .await
        .unwrap();
    assert_eq!(col.len(), 100);
    assert!(col.values.is_empty());
    assert!(col.definition_levels.iter().all(|d| *d < col.max_definition_level));
}

#[tokio::test]
async fn tiny_file_is_not_parquet() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.parquet");
    std::fs::write(&path, b"PAR").unwrap();
    let err = read_footer(&DataSource::local(&path, FetchLog::new()), DEFAULT_TAIL_HINT)
        .await
        .unwrap_err();
    assert!(matches!(err, ParquetError::NotParquet(_)), "{err}");

    std::fs::write(&path, b"this is definitely not a parquet file").unwrap();
    let err = read_footer(&DataSource::local(&path, FetchLog::new()), DEFAULT_TAIL_HINT)
        .await
        .unwrap_err();
    assert!(matches!(err, ParquetError::NotParquet(_)), "{err}");
}

#[tokio::test]
async fn unsupported_inputs_fail_loudly() {
    let (src, _) = source("unsupported_delta_binary_packed");
    let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.unwrap();
    let err = file.read_rows(None, None).await.unwrap_err();
    assert!(matches!(err, ParquetError::UnsupportedEncoding { .. }), "{err}");

    let (src, _) = source("unsupported_lz4");
    let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.unwrap();
    let err = file.read_rows(None, None).await.unwrap_err();
    assert!(matches!(err, ParquetError::UnsupportedCodec { .. }), "{err}");
}

#[tokio::test]
async fn pruning_only_reads_surviving_groups() {
    let (src, log) = source("stats_multi_rowgroup");
    let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.unwrap();
    log.clear();
    let pred = SimplePredicate::new("x", CompareOp::Lt, Value::Int(150));
    let groups = prune_row_groups(&file.metadata, &pred).unwrap();
    assert!(groups.len() < file.metadata.row_groups.len());
    file.read_rows(Some(&["x"]), Some(&pred)).await.unwrap();
    let x = file.metadata.schema.column_by_path(&["x"]).unwrap();
    let expected: Vec<u64> = groups
        .iter()
        .map(|&g| file.metadata.row_groups[g].columns[x].byte_range().offset)
        .collect();
    let fetched: Vec<u64> = log.events().iter().map(|e| e.range.unwrap().offset).collect();
    assert_eq!(fetched, expected);

    let err = prune_row_groups(&file.metadata, &SimplePredicate::new("nope", CompareOp::Eq, Value::Int(1)))
        .unwrap_err();
    assert!(matches!(err, ParquetError::UnknownColumn(_)));
}

fn matches(row_value: &Value, pred: &SimplePredicate) -> bool {
    let Some(ord) = sql_cmp(row_value, &pred.value) else { return false };
    match pred.op {
        CompareOp::Eq => ord.is_eq(),
        CompareOp::Lt => ord.is_lt(),
        CompareOp::LtEq => ord.is_le(),
        CompareOp::Gt => ord.is_gt(),
        CompareOp::GtEq => ord.is_ge(),
    }
}

#[tokio::test]
async fn random_predicates_prune_without_losing_rows() {
    let (src, _) = source("stats_multi_rowgroup");
    let file = ParquetFile::open(src, DEFAULT_TAIL_HINT).await.unwrap();
    let names = file.field_names();
    let all = file.read_rows(None, None).await.unwrap();
    let per_group: Vec<Vec<Vec<Value>>> = {
        let mut out = Vec::new();
        let mut start = 0;
        for rg in &file.metadata.row_groups {
            let n = rg.num_rows as usize;
            out.push(all[start..start + n].to_vec());
            start += n;
        }
        out
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let ops = [CompareOp::Eq, CompareOp::Lt, CompareOp::LtEq, CompareOp::Gt, CompareOp::GtEq];
    for _ in 0..1000 {
        let col = rng.random_range(0..names.len());
        let value = match names[col].as_str() {
            "x" => Value::Int(rng.random_range(-10..1050)),
            "s" => Value::string(format!("k{:03}", rng.random_range(0..30))),
            "d" => Value::Float(rng.random_range(-5.0..110.0)),
            _ => Value::Int(rng.random_range(-5..60)),
        };
        let pred = SimplePredicate::new(names[col].clone(), ops[rng.random_range(0..ops.len())], value);
        let unpruned: Vec<&Vec<Value>> = all.iter().filter(|r| matches(&r[col], &pred)).collect();
        let kept = prune_row_groups(&file.metadata, &pred).unwrap();
        let pruned: Vec<&Vec<Value>> = kept
            .iter()
            .flat_map(|&g| per_group[g].iter())
            .filter(|r| matches(&r[col], &pred))
            .collect();
        assert_eq!(pruned, unpruned, "{pred:?}");
    }
}

#[tokio::test]
async fn groups_without_stats_are_kept() {
    let (src, _) = source("stats_multi_rowgroup");
    let mut meta = read_footer(&src, DEFAULT_TAIL_HINT).await.unwrap();
    for rg in &mut meta.row_groups {
        for c in &mut rg.columns {
            c.statistics = None;
        }
    }
    let kept = prune_row_groups(&meta, &SimplePredicate::new("x", CompareOp::Eq, Value::Int(-1))).unwrap();
    assert_eq!(kept.len(), meta.row_groups.len());
}
