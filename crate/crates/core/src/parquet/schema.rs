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

//! The Parquet schema tree and physical-to-logical value conversion.

use std::sync::Arc;

use bytes::Bytes;

use super::ParquetError;
use crate::value::{Decimal, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhysicalType {
    Boolean,
    Int32,
    Int64,
    Int96,
    Float,
    Double,
    ByteArray,
    FixedLenByteArray(usize),
}

impl PhysicalType {
    pub fn name(&self) -> &'static str {
        match self {
            PhysicalType::Boolean => "BOOLEAN",
            PhysicalType::Int32 => "INT32",
            PhysicalType::Int64 => "INT64",
            PhysicalType::Int96 => "INT96",
            PhysicalType::Float => "FLOAT",
            PhysicalType::Double => "DOUBLE",
            PhysicalType::ByteArray => "BYTE_ARRAY",
            PhysicalType::FixedLenByteArray(_) => "FIXED_LEN_BYTE_ARRAY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repetition {
    Required,
    Optional,
    Repeated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Millis,
    Micros,
    Nanos,
}

/// Logical annotation, merged from the modern `LogicalType` union and the
/// legacy `ConvertedType` enum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicalType {
    None,
    String,
    Enum,
    Json,
    Date,
    Timestamp { unit: TimeUnit, utc: bool },
    Decimal { scale: u32, precision: u32 },
    Integer { bits: u8, signed: bool },
    List,
    Map,
    /// Annotation this reader does not interpret; values surface as raw physical values.
    Other(String),
}

#[derive(Debug, Clone)]
pub struct SchemaNode {
    pub name: String,
    pub repetition: Repetition,
    /// `None` for groups.
    pub physical: Option<PhysicalType>,
    pub logical: LogicalType,
    pub field_id: Option<i32>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub max_definition_level: i16,
    pub max_repetition_level: i16,
    /// Column index for leaves, in footer column order.
    pub leaf_index: Option<usize>,
    pub path: Vec<String>,
}

impl SchemaNode {
    pub fn is_leaf(&self) -> bool {
        self.physical.is_some()
    }
}

/// Flattened schema tree; node 0 is the root message.
#[derive(Debug, Clone)]
pub struct SchemaTree {
    pub nodes: Vec<SchemaNode>,
    /// Node index of each leaf column, in column order.
    pub leaves: Vec<usize>,
}

/// Raw schema element as stored in the footer.
#[derive(Debug, Clone, Default)]
pub(crate) struct RawSchemaElement {
    pub physical: Option<i32>,
    pub type_length: Option<i32>,
    pub repetition: Option<i32>,
    pub name: String,
    pub num_children: Option<i32>,
    pub converted: Option<i32>,
    pub scale: Option<i32>,
    pub precision: Option<i32>,
    pub field_id: Option<i32>,
    pub logical: Option<LogicalType>,
}

impl SchemaTree {
    pub(crate) fn from_elements(elements: &[RawSchemaElement]) -> Result<Self, ParquetError> {
        if elements.is_empty() {
            return Err(ParquetError::FooterCorrupt("empty schema".into()));
        }
        let mut tree = SchemaTree {
            nodes: Vec::with_capacity(elements.len()),
            leaves: Vec::new(),
        };
        let mut pos = 0;
        tree.build(elements, &mut pos, None)?;
        if pos != elements.len() {
            return Err(ParquetError::FooterCorrupt(format!(
                "schema has {} trailing elements",
                elements.len() - pos
            )));
        }
        if tree.nodes[0].children.is_empty() {
            return Err(ParquetError::FooterCorrupt("schema root has no children".into()));
        }
        Ok(tree)
    }

    fn build(
        &mut self,
        elements: &[RawSchemaElement],
        pos: &mut usize,
        parent: Option<usize>,
    ) -> Result<usize, ParquetError> {
        let el = elements
            .get(*pos)
            .ok_or_else(|| ParquetError::FooterCorrupt("schema ended early".into()))?;
        *pos += 1;
        let idx = self.nodes.len();
        let repetition = match (parent, el.repetition) {
            (None, _) => Repetition::Required,
            (_, Some(0)) | (_, None) => Repetition::Required,
            (_, Some(1)) => Repetition::Optional,
            (_, Some(2)) => Repetition::Repeated,
            (_, Some(r)) => {
                return Err(ParquetError::FooterCorrupt(format!("bad repetition {r}")))
            }
        };
        let num_children = el.num_children.unwrap_or(0);
        let physical = if num_children > 0 || parent.is_none() {
            None
        } else {
            Some(match el.physical {
                Some(0) => PhysicalType::Boolean,
                Some(1) => PhysicalType::Int32,
                Some(2) => PhysicalType::Int64,
                Some(3) => PhysicalType::Int96,
                Some(4) => PhysicalType::Float,
                Some(5) => PhysicalType::Double,
                Some(6) => PhysicalType::ByteArray,
                Some(7) => PhysicalType::FixedLenByteArray(el.type_length.unwrap_or(0).max(0) as usize),
                other => {
                    return Err(ParquetError::FooterCorrupt(format!(
                        "leaf {} has bad physical type {other:?}",
                        el.name
                    )))
                }
            })
        };
        let (parent_def, parent_rep, mut path) = match parent {
            Some(p) => {
                let n = &self.nodes[p];
                (n.max_definition_level, n.max_repetition_level, n.path.clone())
            }
            None => (0, 0, Vec::new()),
        };
        if parent.is_some() {
            path.push(el.name.clone());
        }
        let max_definition_level = parent_def + i16::from(parent.is_some() && repetition != Repetition::Required);
        let max_repetition_level = parent_rep + i16::from(repetition == Repetition::Repeated);
        let logical = el.logical.clone().unwrap_or_else(|| converted_to_logical(el));
        self.nodes.push(SchemaNode {
            name: el.name.clone(),
            repetition,
            physical,
            logical,
            field_id: el.field_id,
            children: Vec::new(),
            parent,
            max_definition_level,
            max_repetition_level,
            leaf_index: None,
            path,
        });
        if physical.is_some() {
            self.nodes[idx].leaf_index = Some(self.leaves.len());
            self.leaves.push(idx);
        }
        for _ in 0..num_children {
            let child = self.build(elements, pos, Some(idx))?;
            self.nodes[idx].children.push(child);
        }
        Ok(idx)
    }

    pub fn root(&self) -> &SchemaNode {
        &self.nodes[0]
    }

    /// Top-level fields (direct children of the root), in order.
    pub fn top_level(&self) -> &[usize] {
        &self.nodes[0].children
    }

    pub fn node(&self, idx: usize) -> &SchemaNode {
        &self.nodes[idx]
    }

    pub fn leaf(&self, column: usize) -> &SchemaNode {
        &self.nodes[self.leaves[column]]
    }

    pub fn num_columns(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf column indices under `node` (inclusive), in column order.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(node, &mut out);
        out
    }

    /// The top-level field (node index) containing leaf column `column`.
    pub fn top_level_of_leaf(&self, column: usize) -> usize {
        let mut node = self.leaves[column];
        while let Some(p) = self.nodes[node].parent {
            if p == 0 {
                return node;
            }
            node = p;
        }
        node
    }

    fn collect_leaves(&self, node: usize, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        if let Some(leaf) = n.leaf_index {
            out.push(leaf);
        }
        for &c in &n.children {
            self.collect_leaves(c, out);
        }
    }

    pub fn top_level_index(&self, name: &str) -> Option<usize> {
        self.top_level()
            .iter()
            .position(|&i| self.nodes[i].name == name)
    }

    pub fn column_by_path(&self, path: &[&str]) -> Option<usize> {
        self.leaves
            .iter()
            .position(|&i| self.nodes[i].path.iter().map(String::as_str).eq(path.iter().copied()))
    }

    /// True when no leaf needs level-driven assembly beyond nullability.
    pub fn is_flat(&self) -> bool {
        self.top_level().iter().all(|&i| self.nodes[i].is_leaf())
            && self.leaves.iter().all(|&i| self.nodes[i].max_repetition_level == 0)
    }
}

fn converted_to_logical(el: &RawSchemaElement) -> LogicalType {
    match el.converted {
        None => LogicalType::None,
        Some(0) => LogicalType::String,
        Some(1) | Some(2) => LogicalType::Map,
        Some(3) => LogicalType::List,
        Some(4) => LogicalType::Enum,
        Some(5) => LogicalType::Decimal {
            scale: el.scale.unwrap_or(0).max(0) as u32,
            precision: el.precision.unwrap_or(0).max(0) as u32,
        },
        Some(6) => LogicalType::Date,
        Some(9) => LogicalType::Timestamp { unit: TimeUnit::Millis, utc: true },
        Some(10) => LogicalType::Timestamp { unit: TimeUnit::Micros, utc: true },
        Some(c @ 11..=14) => LogicalType::Integer { bits: 8 << (c - 11), signed: false },
        Some(c @ 15..=18) => LogicalType::Integer { bits: 8 << (c - 15), signed: true },
        Some(19) => LogicalType::Json,
        Some(c) => LogicalType::Other(format!("converted type {c}")),
    }
}

impl LogicalType {
    /// Whether values of this annotation surface as raw physical values.
    pub fn is_uninterpreted(&self) -> bool {
        matches!(self, LogicalType::Other(_) | LogicalType::Timestamp { unit: TimeUnit::Nanos, .. })
    }
}

/// Converts decoded physical values to runtime values for one leaf.
#[derive(Debug, Clone)]
pub struct LeafConverter {
    pub physical: PhysicalType,
    pub logical: LogicalType,
}

impl LeafConverter {
    pub fn for_leaf(node: &SchemaNode) -> Self {
        Self {
            physical: node.physical.expect("leaf has a physical type"),
            logical: node.logical.clone(),
        }
    }

    pub fn int32(&self, v: i32) -> Value {
        match self.logical {
            LogicalType::Date => Value::Date(v),
            LogicalType::Decimal { scale, .. } => Value::Decimal(Decimal::new(v as i128, scale)),
            LogicalType::Integer { signed: false, .. } => Value::Int(v as u32 as i64),
            _ => Value::Int(v as i64),
        }
    }

    pub fn int64(&self, v: i64) -> Value {
        match self.logical {
            LogicalType::Timestamp { unit: TimeUnit::Millis, .. } => Value::Timestamp(v.saturating_mul(1000)),
            LogicalType::Timestamp { unit: TimeUnit::Micros, .. } => Value::Timestamp(v),
            LogicalType::Decimal { scale, .. } => Value::Decimal(Decimal::new(v as i128, scale)),
            _ => Value::Int(v),
        }
    }

    pub fn bytes(&self, b: Bytes) -> Value {
        match &self.logical {
            LogicalType::String | LogicalType::Enum | LogicalType::Json => match std::str::from_utf8(&b) {
                Ok(s) => Value::String(Arc::from(s)),
                Err(_) => Value::Binary(b),
            },
            LogicalType::None if self.physical == PhysicalType::ByteArray => Value::Binary(b),
            LogicalType::Decimal { scale, .. } => match be_signed(&b) {
                Some(v) => Value::Decimal(Decimal::new(v, *scale)),
                None => Value::Binary(b),
            },
            _ => Value::Binary(b),
        }
    }
}

/// Big-endian two's-complement integer of up to 16 bytes.
fn be_signed(b: &[u8]) -> Option<i128> {
    if b.is_empty() || b.len() > 16 {
        return None;
    }
    let mut v: i128 = if b[0] & 0x80 != 0 { -1 } else { 0 };
    for &byte in b {
        v = (v << 8) | byte as i128;
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(name: &str, rep: i32, physical: Option<i32>, children: i32) -> RawSchemaElement {
        RawSchemaElement {
            name: name.into(),
            repetition: Some(rep),
            physical,
            num_children: (children > 0).then_some(children),
            ..Default::default()
        }
    }

    #[test]
    fn levels_follow_repetition_labels() {
        // message { optional group xs (LIST) { repeated group list { optional int64 element } } ; required int32 id }
        let mut xs = el("xs", 1, None, 1);
        xs.converted = Some(3);
        let elements = vec![
            el("schema", 0, None, 2),
            xs,
            el("list", 2, None, 1),
            el("element", 1, Some(2), 0),
            el("id", 0, Some(1), 0),
        ];
        let tree = SchemaTree::from_elements(&elements).unwrap();
        assert_eq!(tree.num_columns(), 2);
        let element = tree.leaf(0);
        assert_eq!(element.path, ["xs", "list", "element"]);
        assert_eq!((element.max_definition_level, element.max_repetition_level), (3, 1));
        let id = tree.leaf(1);
        assert_eq!((id.max_definition_level, id.max_repetition_level), (0, 0));
        assert_eq!(tree.node(1).logical, LogicalType::List);
        assert!(!tree.is_flat());
    }

    #[test]
    fn root_without_children_is_corrupt() {
        let err = SchemaTree::from_elements(&[el("schema", 0, None, 0)]).unwrap_err();
        assert!(matches!(err, ParquetError::FooterCorrupt(_)));
    }

    #[test]
    fn decimal_bytes_are_big_endian_signed() {
        assert_eq!(be_signed(&[0xff, 0x85]), Some(-123));
        assert_eq!(be_signed(&[0x00, 0x7b]), Some(123));
        let conv = LeafConverter {
            physical: PhysicalType::FixedLenByteArray(2),
            logical: LogicalType::Decimal { scale: 2, precision: 4 },
        };
        assert_eq!(conv.bytes(Bytes::from_static(&[0xff, 0x85])).to_string(), "-1.23");
    }
}
