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

//! Record assembly from repetition and definition levels.

use std::collections::HashMap;
use std::sync::Arc;

use super::page::DecodedColumn;
use super::schema::{LogicalType, Repetition, SchemaTree};
use super::ParquetError;
use crate::value::Value;

struct Cursor<'a> {
    col: &'a DecodedColumn,
    pos: usize,
    value: usize,
}

impl Cursor<'_> {
    fn def(&self) -> Option<i16> {
        self.col.definition_levels.get(self.pos).copied()
    }

    fn rep(&self) -> Option<i16> {
        self.col.repetition_levels.get(self.pos).copied()
    }
}

struct Assembler<'a> {
    schema: &'a SchemaTree,
    /// Cursor per leaf column index.
    cursors: HashMap<usize, Cursor<'a>>,
    /// First leaf column under each node, cached.
    first_leaf: HashMap<usize, usize>,
    leaves_under: HashMap<usize, Vec<usize>>,
}

impl<'a> Assembler<'a> {
    fn new(schema: &'a SchemaTree) -> Self {
        Self {
            schema,
            cursors: HashMap::new(),
            first_leaf: HashMap::new(),
            leaves_under: HashMap::new(),
        }
    }

    fn leaves(&mut self, node: usize) -> &[usize] {
        let schema = self.schema;
        self.leaves_under.entry(node).or_insert_with(|| schema.leaves_under(node))
    }

    fn first(&mut self, node: usize) -> usize {
        if let Some(c) = self.first_leaf.get(&node) {
            return *c;
        }
        let c = self.leaves(node)[0];
        self.first_leaf.insert(node, c);
        c
    }

    fn mismatch(&self, node: usize, what: &str) -> ParquetError {
        ParquetError::LevelMismatch(format!("{what} at {}", self.schema.node(node).path.join(".")))
    }

    fn peek_def(&mut self, node: usize) -> Result<i16, ParquetError> {
        let c = self.first(node);
        self.cursors[&c].def().ok_or_else(|| self.mismatch(node, "levels exhausted"))
    }

    /// Consumes one entry from every leaf under `node` (an absent or empty instance).
    fn skip_entry(&mut self, node: usize) {
        let leaves = self.leaves(node).to_vec();
        for l in leaves {
            let c = self.cursors.get_mut(&l).expect("cursor");
            c.pos += 1;
        }
    }

    /// Reads one instance of a non-repeated node (optional or required).
    fn read_value(&mut self, node: usize) -> Result<Value, ParquetError> {
        let n = self.schema.node(node);
        if n.repetition == Repetition::Optional && self.peek_def(node)? < n.max_definition_level {
            self.skip_entry(node);
            return Ok(Value::Null);
        }
        self.read_present(node)
    }

    /// Reads the content of a node known to be present at the current entry.
    fn read_present(&mut self, node: usize) -> Result<Value, ParquetError> {
        let n = self.schema.node(node);
        if n.is_leaf() {
            let leaf = n.leaf_index.expect("leaf");
            let max = n.max_definition_level;
            let c = self.cursors.get_mut(&leaf).expect("cursor");
            let def = c.def().ok_or_else(|| ParquetError::LevelMismatch("leaf exhausted".into()))?;
            c.pos += 1;
            if def < max {
                return Err(self.mismatch(node, "required value missing"));
            }
            let v = c
                .col
                .values
                .get(c.value)
                .cloned()
                .ok_or_else(|| ParquetError::LevelMismatch("values exhausted".into()))?;
            c.value += 1;
            return Ok(v);
        }
        match &n.logical {
            LogicalType::List if n.children.len() == 1 && self.schema.node(n.children[0]).repetition == Repetition::Repeated => {
                let rep = n.children[0];
                let items = self.read_repeated(rep, |a, r| a.list_element(node, r))?;
                Ok(Value::List(Arc::new(items)))
            }
            LogicalType::Map if n.children.len() == 1 && self.schema.node(n.children[0]).repetition == Repetition::Repeated => {
                let kv = n.children[0];
                let items = self.read_repeated(kv, |a, r| a.map_entry(r))?;
                Ok(Value::List(Arc::new(items)))
            }
            _ => self.read_struct(node),
        }
    }

    fn read_struct(&mut self, node: usize) -> Result<Value, ParquetError> {
        let children = self.schema.node(node).children.clone();
        let mut fields = Vec::with_capacity(children.len());
        for c in children {
            let v = self.read_child(c)?;
            fields.push((Arc::from(self.schema.node(c).name.as_str()), v));
        }
        Ok(Value::Struct(Arc::new(fields)))
    }

    /// A struct child: repeated children without a LIST annotation become lists.
    fn read_child(&mut self, node: usize) -> Result<Value, ParquetError> {
        if self.schema.node(node).repetition == Repetition::Repeated {
            let items = self.read_repeated(node, |a, r| a.read_present(r))?;
            Ok(Value::List(Arc::new(items)))
        } else {
            self.read_value(node)
        }
    }

    /// Reads all instances of repeated `node` belonging to the current parent instance.
    fn read_repeated(
        &mut self,
        node: usize,
        mut item: impl FnMut(&mut Self, usize) -> Result<Value, ParquetError>,
    ) -> Result<Vec<Value>, ParquetError> {
        let (max_def, max_rep) = {
            let n = self.schema.node(node);
            (n.max_definition_level, n.max_repetition_level)
        };
        if self.peek_def(node)? < max_def {
            self.skip_entry(node);
            return Ok(Vec::new());
        }
        let first = self.first(node);
        let mut items = Vec::new();
        loop {
            items.push(item(self, node)?);
            match self.cursors[&first].rep() {
                Some(r) if r >= max_rep => continue,
                _ => break,
            }
        }
        Ok(items)
    }

    /// Element of a LIST-annotated group, following the backward-compatibility rules.
    fn list_element(&mut self, list: usize, rep: usize) -> Result<Value, ParquetError> {
        let r = self.schema.node(rep);
        if r.is_leaf() {
            return self.read_present(rep);
        }
        let list_name = &self.schema.node(list).name;
        let legacy = r.children.len() > 1 || r.name == "array" || r.name == format!("{list_name}_tuple");
        if legacy {
            return self.read_struct(rep);
        }
        self.read_child(r.children[0])
    }

    /// MAP entries surface as `{key, value}` structs.
    fn map_entry(&mut self, kv: usize) -> Result<Value, ParquetError> {
        let children = self.schema.node(kv).children.clone();
        if children.len() != 2 {
            return self.read_struct(kv);
        }
        let key = self.read_child(children[0])?;
        let value = self.read_child(children[1])?;
        Ok(Value::Struct(Arc::new(vec![
            (Arc::from("key"), key),
            (Arc::from("value"), value),
        ])))
    }

    /// Reads one top-level field value for the next record.
    fn read_field(&mut self, node: usize) -> Result<Value, ParquetError> {
        self.read_child(node)
    }
}

/// Assembles one top-level field across all records of a row group.
///
/// `columns` must hold the decoded chunk for every leaf under the field, keyed by leaf column index.
pub fn assemble_field(
    schema: &SchemaTree,
    field: usize,
    columns: &HashMap<usize, DecodedColumn>,
) -> Result<Vec<Value>, ParquetError> {
    let mut a = Assembler::new(schema);
    let leaves = a.leaves(field).to_vec();
    let mut records = None;
    for l in &leaves {
        let col = columns
            .get(l)
            .ok_or_else(|| ParquetError::UnknownColumn(schema.leaf(*l).path.join(".")))?;
        let n = col.num_records();
        if *records.get_or_insert(n) != n {
            return Err(ParquetError::LevelMismatch(format!(
                "leaf {} has {n} records, expected {}",
                schema.leaf(*l).path.join("."),
                records.unwrap_or(0)
            )));
        }
        a.cursors.insert(*l, Cursor { col, pos: 0, value: 0 });
    }
    let records = records.unwrap_or(0);
    let node = &schema.node(field);

    // Flat leaf: the column itself.
    if node.is_leaf() && node.max_repetition_level == 0 {
        let col = &columns[&leaves[0]];
        if node.max_definition_level == 0 {
            return Ok(col.values.clone());
        }
        let mut vals = col.values.iter();
        return col
            .definition_levels
            .iter()
            .map(|d| {
                if *d == node.max_definition_level {
                    vals.next().cloned().ok_or_else(|| ParquetError::LevelMismatch("values exhausted".into()))
                } else {
                    Ok(Value::Null)
                }
            })
            .collect();
    }

    let mut out = Vec::with_capacity(records);
    for _ in 0..records {
        out.push(a.read_field(field)?);
    }
    for l in &leaves {
        let c = &a.cursors[l];
        if c.pos != c.col.len() || c.value != c.col.values.len() {
            return Err(ParquetError::LevelMismatch(format!(
                "leaf {} not fully consumed ({} of {} entries)",
                schema.leaf(*l).path.join("."),
                c.pos,
                c.col.len()
            )));
        }
    }
    Ok(out)
}

/// Assembles rows for the top-level fields covering `projection` (leaf column indices).
///
/// Every projected field's leaves must be present in `columns`. Rows list fields in schema order.
pub fn assemble_records(
    columns: &HashMap<usize, DecodedColumn>,
    schema: &SchemaTree,
    projection: &[usize],
) -> Result<Vec<Vec<Value>>, ParquetError> {
    let mut fields: Vec<usize> = Vec::new();
    for &leaf in projection {
        if leaf >= schema.num_columns() {
            return Err(ParquetError::UnknownColumn(format!("column #{leaf}")));
        }
        let field = schema.top_level_of_leaf(leaf);
        if !fields.contains(&field) {
            fields.push(field);
        }
    }
    fields.sort_unstable();
    let mut per_field = Vec::with_capacity(fields.len());
    for f in &fields {
        per_field.push(assemble_field(schema, *f, columns)?);
    }
    let rows = per_field.first().map_or(0, Vec::len);
    if per_field.iter().any(|c| c.len() != rows) {
        return Err(ParquetError::LevelMismatch("fields disagree on record count".into()));
    }
    let mut iters: Vec<_> = per_field.into_iter().map(Vec::into_iter).collect();
    Ok((0..rows)
        .map(|_| iters.iter_mut().map(|i| i.next().expect("length checked")).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parquet::schema::RawSchemaElement;

    fn el(name: &str, rep: i32, physical: Option<i32>, children: i32, converted: Option<i32>) -> RawSchemaElement {
        RawSchemaElement {
            name: name.into(),
            repetition: Some(rep),
            physical,
            num_children: (children > 0).then_some(children),
            converted,
            ..Default::default()
        }
    }

    fn list_schema() -> SchemaTree {
        SchemaTree::from_elements(&[
            el("schema", 0, None, 1, None),
            el("xs", 1, None, 1, Some(3)),
            el("list", 2, None, 1, None),
            el("element", 1, Some(2), 0, None),
        ])
        .unwrap()
    }

    fn col(defs: &[i16], reps: &[i16], values: &[i64], max_def: i16, max_rep: i16) -> DecodedColumn {
        DecodedColumn {
            definition_levels: defs.to_vec(),
            repetition_levels: reps.to_vec(),
            values: values.iter().map(|v| Value::Int(*v)).collect(),
            max_definition_level: max_def,
            max_repetition_level: max_rep,
        }
    }

    fn ints(v: &[i64]) -> Value {
        Value::List(Arc::new(v.iter().map(|x| Value::Int(*x)).collect()))
    }

    #[test]
    fn single_repeated_level() {
        let schema = list_schema();
        let cols = HashMap::from([(0, col(&[3, 3, 3, 3], &[0, 1, 1, 0], &[1, 2, 3, 4], 3, 1))]);
        let rows = assemble_field(&schema, schema.top_level()[0], &cols).unwrap();
        assert_eq!(rows, [ints(&[1, 2, 3]), ints(&[4])]);
    }

    #[test]
    fn null_list_empty_list_and_null_element() {
        let schema = list_schema();
        // null list, empty list, [null, 7]
        let cols = HashMap::from([(0, col(&[0, 1, 2, 3], &[0, 0, 0, 1], &[7], 3, 1))]);
        let rows = assemble_field(&schema, schema.top_level()[0], &cols).unwrap();
        assert_eq!(
            rows,
            [
                Value::Null,
                ints(&[]),
                Value::List(Arc::new(vec![Value::Null, Value::Int(7)]))
            ]
        );
    }

    #[test]
    fn flat_schema_is_a_zip() {
        let schema = SchemaTree::from_elements(&[
            el("schema", 0, None, 2, None),
            el("a", 0, Some(2), 0, None),
            el("b", 1, Some(2), 0, None),
        ])
        .unwrap();
        let cols = HashMap::from([
            (0, col(&[0, 0, 0], &[0, 0, 0], &[1, 2, 3], 0, 0)),
            (1, col(&[1, 0, 1], &[0, 0, 0], &[10, 30], 1, 0)),
        ]);
        let rows = assemble_records(&cols, &schema, &[0, 1]).unwrap();
        assert_eq!(
            rows,
            [
                vec![Value::Int(1), Value::Int(10)],
                vec![Value::Int(2), Value::Null],
                vec![Value::Int(3), Value::Int(30)]
            ]
        );
    }

    #[test]
    fn inconsistent_record_counts_are_rejected() {
        let schema = SchemaTree::from_elements(&[
            el("schema", 0, None, 1, None),
            el("s", 0, None, 2, None),
            el("a", 0, Some(2), 0, None),
            el("b", 0, Some(2), 0, None),
        ])
        .unwrap();
        let cols = HashMap::from([
            (0, col(&[0, 0], &[0, 0], &[1, 2], 0, 0)),
            (1, col(&[0], &[0], &[1], 0, 0)),
        ]);
        let err = assemble_records(&cols, &schema, &[0, 1]).unwrap_err();
        assert!(matches!(err, ParquetError::LevelMismatch(_)));
    }
}
