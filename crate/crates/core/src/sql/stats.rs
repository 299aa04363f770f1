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

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Serialize;

/// Rough price of forcing a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostClass {
    Cheap,
    Io,
    Inference,
}

impl CostClass {
    fn slot(self) -> usize {
        match self {
            CostClass::Cheap => 0,
            CostClass::Io => 1,
            CostClass::Inference => 2,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct InFlight {
    current: u64,
    peak: u64,
}

/// Live counters for one query. Safe to read while the query runs.
#[derive(Debug, Default)]
pub struct ExecStats {
    udf_calls: Mutex<BTreeMap<String, u64>>,
    udf_in_flight: Mutex<BTreeMap<String, InFlight>>,
    cells_forced: [AtomicU64; 3],
    rows_emitted: AtomicU64,
    bytes_fetched: AtomicU64,
    buffered_rows: AtomicU64,
    buffered_peak_rows: AtomicU64,
    warnings: AtomicU64,
}

/// Point-in-time copy of [`ExecStats`], serializable as JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatsSnapshot {
    pub udf_calls: BTreeMap<String, u64>,
    pub udf_peak_in_flight: BTreeMap<String, u64>,
    pub cells_forced: CellsForced,
    pub rows_emitted: u64,
    pub bytes_fetched: u64,
    pub buffered_peak_rows: u64,
    pub warnings: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellsForced {
    pub cheap: u64,
    pub io: u64,
    pub inference: u64,
}

impl StatsSnapshot {
    pub fn total_udf_calls(&self) -> u64 {
        self.udf_calls.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

impl ExecStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn cell_forced(&self, cost: CostClass) {
        self.cells_forced[cost.slot()].fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn udf_started(&self, name: &str) {
        *self.udf_calls.lock().unwrap().entry(name.to_string()).or_default() += 1;
        let mut map = self.udf_in_flight.lock().unwrap();
        let f = map.entry(name.to_string()).or_default();
        f.current += 1;
        f.peak = f.peak.max(f.current);
    }

    pub(crate) fn udf_finished(&self, name: &str) {
        if let Some(f) = self.udf_in_flight.lock().unwrap().get_mut(name) {
            f.current = f.current.saturating_sub(1);
        }
    }

    pub(crate) fn row_emitted(&self) {
        self.rows_emitted.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn add_bytes(&self, n: u64) {
        self.bytes_fetched.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn warn(&self) {
        self.warnings.fetch_add(1, Ordering::Relaxed);
    }

    /// Rows now held by an operator (window, hash table, sort buffer).
    pub(crate) fn buffer_add(&self, n: u64) {
        let now = self.buffered_rows.fetch_add(n, Ordering::Relaxed) + n;
        self.buffered_peak_rows.fetch_max(now, Ordering::Relaxed);
    }

    pub(crate) fn buffer_sub(&self, n: u64) {
        let _ = self
            .buffered_rows
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |c| Some(c.saturating_sub(n)));
    }

    pub fn udf_calls(&self, name: &str) -> u64 {
        self.udf_calls.lock().unwrap().get(name).copied().unwrap_or(0)
    }

    pub fn total_udf_calls(&self) -> u64 {
        self.udf_calls.lock().unwrap().values().sum()
    }

    pub fn rows_emitted(&self) -> u64 {
        self.rows_emitted.load(Ordering::Relaxed)
    }

    pub fn cells_forced(&self, cost: CostClass) -> u64 {
        self.cells_forced[cost.slot()].load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let load = |a: &AtomicU64| a.load(Ordering::Relaxed);
        StatsSnapshot {
            udf_calls: self.udf_calls.lock().unwrap().clone(),
            udf_peak_in_flight: self
                .udf_in_flight
                .lock()
                .unwrap()
                .iter()
                .map(|(k, v)| (k.clone(), v.peak))
                .collect(),
            cells_forced: CellsForced {
                cheap: load(&self.cells_forced[0]),
                io: load(&self.cells_forced[1]),
                inference: load(&self.cells_forced[2]),
            },
            rows_emitted: load(&self.rows_emitted),
            bytes_fetched: load(&self.bytes_fetched),
            buffered_peak_rows: load(&self.buffered_peak_rows),
            warnings: load(&self.warnings),
        }
    }
}
