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

//! Row-group pruning with footer min/max statistics.

use std::cmp::Ordering;

use super::metadata::FileMetadata;
use super::ParquetError;
use crate::value::{sql_cmp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

impl CompareOp {
    /// The operator seen from the other side (`5 < x` is `x > 5`).
    pub fn flip(self) -> Self {
        match self {
            CompareOp::Eq => CompareOp::Eq,
            CompareOp::Lt => CompareOp::Gt,
            CompareOp::LtEq => CompareOp::GtEq,
            CompareOp::Gt => CompareOp::Lt,
            CompareOp::GtEq => CompareOp::LtEq,
        }
    }
}

/// `column op literal`, where `column` is a dotted leaf path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplePredicate {
    pub column: String,
    pub op: CompareOp,
    pub value: Value,
}

impl SimplePredicate {
    pub fn new(column: impl Into<String>, op: CompareOp, value: Value) -> Self {
        Self {
            column: column.into(),
            op,
            value,
        }
    }

    /// Whether some value in `[min, max]` could satisfy the predicate.
    /// Incomparable bounds keep the group.
    fn may_match(&self, min: &Value, max: &Value) -> bool {
        let lo = sql_cmp(min, &self.value);
        let hi = sql_cmp(max, &self.value);
        match self.op {
            CompareOp::Eq => !matches!(lo, Some(Ordering::Greater)) && !matches!(hi, Some(Ordering::Less)),
            CompareOp::Lt => !matches!(lo, Some(Ordering::Greater | Ordering::Equal)),
            CompareOp::LtEq => !matches!(lo, Some(Ordering::Greater)),
            CompareOp::Gt => !matches!(hi, Some(Ordering::Less | Ordering::Equal)),
            CompareOp::GtEq => !matches!(hi, Some(Ordering::Less)),
        }
    }
}

/// Indices of row groups that could contain a row matching `predicate`.
pub fn prune_row_groups(meta: &FileMetadata, predicate: &SimplePredicate) -> Result<Vec<usize>, ParquetError> {
    let path: Vec<&str> = predicate.column.split('.').collect();
    let column = meta
        .schema
        .column_by_path(&path)
        .ok_or_else(|| ParquetError::UnknownColumn(predicate.column.clone()))?;
    // Repeated leaves have per-element stats; a row-level comparison does not apply.
    if meta.schema.leaf(column).max_repetition_level > 0 || predicate.value.is_null() {
        return Ok((0..meta.row_groups.len()).collect());
    }
    Ok(meta
        .row_groups
        .iter()
        .enumerate()
        .filter(|(_, rg)| {
            let chunk = &rg.columns[column];
            match &chunk.statistics {
                Some(s) => {
                    // An all-null group cannot satisfy a comparison.
                    if s.null_count == Some(rg.num_rows) && rg.num_rows > 0 && s.min.is_none() {
                        return false;
                    }
                    match (&s.min, &s.max) {
                        (Some(lo), Some(hi)) => predicate.may_match(lo, hi),
                        _ => true,
                    }
                }
                None => true,
            }
        })
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(op: CompareOp, v: i64) -> SimplePredicate {
        SimplePredicate::new("x", op, Value::Int(v))
    }

    #[test]
    fn interval_rules() {
        let (lo, hi) = (Value::Int(4), Value::Int(8));
        assert!(pred(CompareOp::Eq, 5).may_match(&lo, &hi));
        assert!(!pred(CompareOp::Eq, 3).may_match(&lo, &hi));
        assert!(!pred(CompareOp::Lt, 4).may_match(&lo, &hi));
        assert!(pred(CompareOp::LtEq, 4).may_match(&lo, &hi));
        assert!(!pred(CompareOp::Gt, 8).may_match(&lo, &hi));
        assert!(pred(CompareOp::GtEq, 8).may_match(&lo, &hi));
        // Incomparable literal keeps the group.
        assert!(SimplePredicate::new("x", CompareOp::Eq, Value::string("a")).may_match(&lo, &hi));
    }
}
