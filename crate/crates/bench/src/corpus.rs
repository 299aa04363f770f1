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

//! Synthetic agent traces written as a multi-row-group Parquet file.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use parquet::basic::Compression;
use parquet::data_type::{BoolType, ByteArray, ByteArrayType, Int64Type};
use parquet::errors::Result;
use parquet::file::properties::{EnabledStatistics, WriterProperties};
use parquet::file::writer::SerializedFileWriter;
use parquet::schema::parser::parse_message_type;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mock::label_for;

pub const TOOLS: [&str; 6] = ["bash", "read", "edit", "grep", "web_fetch", "write"];

const WORDS: [&str; 24] = [
    "agent", "call", "file", "error", "retry", "token", "model", "result", "patch", "diff", "stdout", "stderr",
    "query", "table", "session", "turn", "build", "test", "pass", "fail", "timeout", "context", "prompt", "tool",
];

const SCHEMA: &str = "message trace {
    required binary session_id (STRING);
    required int64 turn;
    required binary tool (STRING);
    required binary content (STRING);
    required boolean is_error;
}";

#[derive(Debug, Clone, Copy)]
pub struct TraceCorpusSpec {
    pub rows: usize,
    pub seed: u64,
    /// Fraction of rows with `mock_llm(content) = 1`; passing rows are evenly spaced.
    pub pass_rate: f64,
    pub row_group_rows: usize,
}

impl Default for TraceCorpusSpec {
    fn default() -> Self {
        Self {
            rows: 10_000,
            seed: 42,
            pass_rate: 0.125,
            row_group_rows: 1_000,
        }
    }
}

impl TraceCorpusSpec {
    /// Every `pass_period()`-th row passes.
    pub fn pass_period(&self) -> usize {
        assert!(self.pass_rate > 0.0 && self.pass_rate <= 1.0, "pass_rate must be in (0, 1]");
        (1.0 / self.pass_rate).round() as usize
    }

    pub fn passes(&self, row: usize) -> bool {
        (row + 1) % self.pass_period() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub session_id: String,
    pub turn: i64,
    pub tool: String,
    pub content: String,
    pub is_error: bool,
}

/// Label the canonical predicate (`mock_llm(content) = 1`) looks for.
pub const PASS_LABEL: i64 = 1;

/// Rows as a pure function of `spec`.
pub fn generate_rows(spec: &TraceCorpusSpec) -> Vec<TraceRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.rows);
    let (mut session, mut turn, mut session_len) = (0usize, 0i64, rng.random_range(1..=20));
    for i in 0..spec.rows {
        if turn == session_len {
            session += 1;
            turn = 0;
            session_len = rng.random_range(1..=20);
        }
        let target = rng.random_range(512..=5_100);
        let mut base = String::with_capacity(target + 16);
        while base.len() < target {
            if !base.is_empty() {
                base.push(' ');
            }
            base.push_str(WORDS[rng.random_range(0..WORDS.len())]);
        }
        base.truncate(target);
        // A nonce steers the mock label so exactly the scheduled rows pass.
        let pass = spec.passes(i);
        let content = (0u32..)
            .map(|nonce| format!("{base} #{nonce}"))
            .find(|c| (label_for(c, 8) == PASS_LABEL) == pass)
            .expect("some nonce works");
        rows.push(TraceRow {
            session_id: format!("s{session:05}"),
            turn,
            tool: TOOLS[rng.random_range(0..TOOLS.len())].to_string(),
            content,
            is_error: rng.random_bool(0.05),
        });
        turn += 1;
    }
    rows
}

/// Writes `rows` as snappy-compressed Parquet with chunk statistics.
pub fn write_parquet(rows: &[TraceRow], row_group_rows: usize, path: &Path) -> Result<()> {
    let schema = Arc::new(parse_message_type(SCHEMA)?);
    let props = Arc::new(
        WriterProperties::builder()
            .set_compression(Compression::SNAPPY)
            .set_statistics_enabled(EnabledStatistics::Chunk)
            .set_max_row_group_row_count(Some(row_group_rows))
            .build(),
    );
    let mut writer = SerializedFileWriter::new(File::create(path)?, schema, props)?;
    for group in rows.chunks(row_group_rows.max(1)) {
        let mut rg = writer.next_row_group()?;
        let strings = |f: fn(&TraceRow) -> &str| -> Vec<ByteArray> {
            group.iter().map(|r| ByteArray::from(f(r).as_bytes().to_vec())).collect()
        };
        let mut col = rg.next_column()?.expect("session_id");
        col.typed::<ByteArrayType>().write_batch(&strings(|r| &r.session_id), None, None)?;
        col.close()?;
        let mut col = rg.next_column()?.expect("turn");
        let turns: Vec<i64> = group.iter().map(|r| r.turn).collect();
        col.typed::<Int64Type>().write_batch(&turns, None, None)?;
        col.close()?;
        let mut col = rg.next_column()?.expect("tool");
        col.typed::<ByteArrayType>().write_batch(&strings(|r| &r.tool), None, None)?;
        col.close()?;
        let mut col = rg.next_column()?.expect("content");
        col.typed::<ByteArrayType>().write_batch(&strings(|r| &r.content), None, None)?;
        col.close()?;
        let mut col = rg.next_column()?.expect("is_error");
        let errors: Vec<bool> = group.iter().map(|r| r.is_error).collect();
        col.typed::<BoolType>().write_batch(&errors, None, None)?;
        col.close()?;
        rg.close()?;
    }
    writer.close()?;
    Ok(())
}

/// Generates the corpus, writes it to `path` and returns the rows written.
pub fn generate_corpus(spec: &TraceCorpusSpec, path: &Path) -> Result<Vec<TraceRow>> {
    let rows = generate_rows(spec);
    write_parquet(&rows, spec.row_group_rows, path)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TraceCorpusSpec {
        TraceCorpusSpec {
            rows: 400,
            ..Default::default()
        }
    }

    #[test]
    fn pass_schedule_is_every_eighth_row() {
        let spec = small();
        let rows = generate_rows(&spec);
        let passing: Vec<usize> = (0..rows.len())
            .filter(|&i| label_for(&rows[i].content, 8) == PASS_LABEL)
            .collect();
        assert_eq!(passing.len(), 50);
        assert!(passing.iter().all(|i| i % 8 == 7));
        let full = TraceCorpusSpec::default();
        assert_eq!((0..full.rows).filter(|&i| full.passes(i)).count(), 1_250);
    }

    #[test]
    fn shape_is_stable_and_seed_changes_content() {
        let a = generate_rows(&small());
        assert_eq!(a, generate_rows(&small()));
        let b = generate_rows(&TraceCorpusSpec { seed: 7, ..small() });
        assert_eq!(a.len(), b.len());
        assert_ne!(a[0].content, b[0].content);
        for r in &a {
            assert!((512..=5_120 + 16).contains(&r.content.len()), "{}", r.content.len());
            assert!(TOOLS.contains(&r.tool.as_str()));
        }
        assert_eq!(a[0].turn, 0);
        assert!(a.iter().any(|r| r.turn > 0));
    }
}
