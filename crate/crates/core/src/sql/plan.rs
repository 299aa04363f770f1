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

//! Name binding and logical planning.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use super::ast::{BinaryOp, Expr, JoinKind, Select, SelectItem};
use super::backend::{PushdownPredicate, ScanRequest, TableBackend};
use super::error::{suggest, SqlError};
use super::expr::{AggFunc, BoundExpr, Scalar};
use super::udf::{UdfDef, UdfKind};
use crate::parquet::CompareOp;
use crate::value::Value;

/// Named query parameters (`$name`).
pub type Params = HashMap<String, Value>;

/// Minimum look-ahead used when buffered operators force keys.
const MIN_BUFFER_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPath {
    Streaming,
    Buffered,
}

#[derive(Default)]
pub(crate) struct Catalog {
    /// Keyed by lowercase name; the value keeps the registered spelling.
    pub tables: BTreeMap<String, (String, Arc<dyn TableBackend>)>,
    pub udfs: BTreeMap<String, UdfDef>,
}

impl Catalog {
    fn table(&self, name: &str, sql: &str, pos: usize) -> Result<(String, Arc<dyn TableBackend>), SqlError> {
        let _ = (sql, pos);
        match self.tables.get(&name.to_ascii_lowercase()) {
            Some((n, b)) => Ok((n.clone(), b.clone())),
            None => {
                let available: Vec<String> = self.tables.values().map(|(n, _)| n.clone()).collect();
                Err(SqlError::UnknownTable {
                    name: name.to_string(),
                    suggestion: suggest(name, available.iter().map(String::as_str)),
                    available,
                })
            }
        }
    }

    pub fn function_names(&self) -> Vec<String> {
        Scalar::names()
            .chain(AggFunc::names())
            .map(str::to_string)
            .chain(self.udfs.values().map(|u| u.name.clone()))
            .collect()
    }
}

#[derive(Clone)]
pub struct UdfCall {
    pub def: UdfDef,
    pub args: Vec<BoundExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggCall {
    pub func: AggFunc,
    pub arg: Option<BoundExpr>,
    pub distinct: bool,
}

pub enum PlanNode {
    /// One row with no columns (`SELECT` without `FROM`).
    Empty,
    Scan {
        table: String,
        backend: Arc<dyn TableBackend>,
        request: ScanRequest,
    },
    Join {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
        kind: JoinKind,
        left_keys: Vec<BoundExpr>,
        right_keys: Vec<BoundExpr>,
        build_left: bool,
        left_width: usize,
        right_width: usize,
    },
    /// Appends one lazy cell per UDF call to every row.
    Map {
        input: Box<PlanNode>,
        udfs: Vec<UdfCall>,
    },
    Filter {
        input: Box<PlanNode>,
        predicate: BoundExpr,
        window: usize,
    },
    Aggregate {
        input: Box<PlanNode>,
        group: Vec<BoundExpr>,
        aggs: Vec<AggCall>,
        window: usize,
    },
    Sort {
        input: Box<PlanNode>,
        keys: Vec<(BoundExpr, bool)>,
        window: usize,
    },
    Limit {
        input: Box<PlanNode>,
        limit: Option<u64>,
        offset: u64,
    },
}

impl PlanNode {
    fn explain(&self, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let child: Option<&PlanNode> = match self {
            PlanNode::Empty => {
                let _ = writeln!(out, "{pad}Empty");
                None
            }
            PlanNode::Scan { table, backend, request } => {
                let cols: Vec<&str> = backend
                    .columns()
                    .iter()
                    .zip(&request.columns)
                    .filter(|(_, n)| **n)
                    .map(|(c, _)| c.name.as_str())
                    .collect();
                let _ = write!(out, "{pad}Scan {table} [{}] ({})", backend.kind(), cols.join(", "));
                if !request.predicates.is_empty() {
                    let preds: Vec<String> = request
                        .predicates
                        .iter()
                        .map(|p| format!("{} {:?} {}", backend.columns()[p.column].name, p.op, p.value))
                        .collect();
                    let _ = write!(out, " pushdown: {}", preds.join(" AND "));
                }
                out.push('\n');
                None
            }
            PlanNode::Join {
                left,
                right,
                kind,
                build_left,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "{pad}HashJoin {kind:?} (build {})",
                    if *build_left { "left" } else { "right" }
                );
                left.explain(depth + 1, out);
                right.explain(depth + 1, out);
                None
            }
            PlanNode::Map { input, udfs } => {
                let calls: Vec<String> = udfs.iter().map(|u| u.def.name.clone()).collect();
                let _ = writeln!(out, "{pad}Map [{}]", calls.join(", "));
                Some(input)
            }
            PlanNode::Filter {
                input,
                predicate,
                window,
            } => {
                let _ = writeln!(out, "{pad}Filter {predicate} (window {window})");
                Some(input)
            }
            PlanNode::Aggregate { input, group, aggs, .. } => {
                let g: Vec<String> = group.iter().map(|e| e.to_string()).collect();
                let _ = writeln!(out, "{pad}Aggregate group=[{}] aggs={}", g.join(", "), aggs.len());
                Some(input)
            }
            PlanNode::Sort { input, keys, .. } => {
                let k: Vec<String> = keys
                    .iter()
                    .map(|(e, d)| format!("{e}{}", if *d { " DESC" } else { "" }))
                    .collect();
                let _ = writeln!(out, "{pad}Sort [{}]", k.join(", "));
                Some(input)
            }
            PlanNode::Limit { input, limit, offset } => {
                let _ = writeln!(out, "{pad}Limit {limit:?} offset {offset}");
                Some(input)
            }
        };
        if let Some(c) = child {
            c.explain(depth + 1, out);
        }
    }

    fn has_buffering(&self) -> bool {
        match self {
            PlanNode::Sort { .. } | PlanNode::Aggregate { .. } => true,
            PlanNode::Empty | PlanNode::Scan { .. } => false,
            PlanNode::Join { left, right, .. } => left.has_buffering() || right.has_buffering(),
            PlanNode::Map { input, .. } | PlanNode::Filter { input, .. } | PlanNode::Limit { input, .. } => {
                input.has_buffering()
            }
        }
    }
}

pub struct LogicalPlan {
    pub root: PlanNode,
    /// Expressions the sink evaluates per output row.
    pub output: Vec<BoundExpr>,
    pub columns: Vec<String>,
    pub path: ExecPath,
    /// Rows whose output cells the sink forces ahead of the consumer.
    pub sink_window: usize,
}

impl LogicalPlan {
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let cols: Vec<String> = self
            .output
            .iter()
            .zip(&self.columns)
            .map(|(e, c)| format!("{c}={e}"))
            .collect();
        let _ = writeln!(out, "Project [{}] path={:?}", cols.join(", "), self.path);
        self.root.explain(1, &mut out);
        out
    }
}

struct ScopeTable {
    binding: String,
    name: String,
    backend: Arc<dyn TableBackend>,
    columns: Vec<String>,
    offset: usize,
}

struct Binder<'a> {
    catalog: &'a Catalog,
    params: Option<&'a Params>,
    tables: Vec<ScopeTable>,
}

impl<'a> Binder<'a> {
    fn width(&self) -> usize {
        self.tables.last().map_or(0, |t| t.offset + t.columns.len())
    }

    fn slot_name(&self, slot: usize) -> String {
        for t in &self.tables {
            if slot >= t.offset && slot < t.offset + t.columns.len() {
                return t.columns[slot - t.offset].clone();
            }
        }
        format!("#{slot}")
    }

    fn table_of_slot(&self, slot: usize) -> Option<(usize, usize)> {
        self.tables
            .iter()
            .position(|t| slot >= t.offset && slot < t.offset + t.columns.len())
            .map(|i| (i, slot - self.tables[i].offset))
    }

    fn find_in(t: &ScopeTable, name: &str) -> Option<usize> {
        t.columns
            .iter()
            .position(|c| c == name)
            .or_else(|| t.columns.iter().position(|c| c.eq_ignore_ascii_case(name)))
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str) -> Result<usize, SqlError> {
        let candidates: Vec<&ScopeTable> = match qualifier {
            Some(q) => {
                let hits: Vec<&ScopeTable> = self
                    .tables
                    .iter()
                    .filter(|t| t.binding.eq_ignore_ascii_case(q))
                    .collect();
                if hits.is_empty() {
                    let bindings: Vec<&str> = self.tables.iter().map(|t| t.binding.as_str()).collect();
                    return Err(SqlError::Bind {
                        message: format!("unknown table or alias '{q}' in '{q}.{name}'"),
                        suggestion: suggest(q, bindings),
                    });
                }
                hits
            }
            None => self.tables.iter().collect(),
        };
        let found: Vec<usize> = candidates
            .iter()
            .filter_map(|t| Self::find_in(t, name).map(|i| t.offset + i))
            .collect();
        match found.len() {
            1 => Ok(found[0]),
            0 => {
                let message = if candidates.is_empty() {
                    format!("column '{name}' cannot be used without a FROM clause")
                } else if candidates.len() == 1 {
                    let t = candidates[0];
                    format!(
                        "column '{name}' not found in table {}; available columns: {}",
                        t.name,
                        t.columns.join(", ")
                    )
                } else {
                    let lists: Vec<String> = candidates
                        .iter()
                        .map(|t| format!("{} ({})", t.binding, t.columns.join(", ")))
                        .collect();
                    format!("column '{name}' not found; available columns: {}", lists.join("; "))
                };
                let all = candidates.iter().flat_map(|t| t.columns.iter().map(String::as_str));
                Err(SqlError::Bind {
                    message,
                    suggestion: suggest(name, all),
                })
            }
            _ => Err(SqlError::bind(format!(
                "column reference '{name}' is ambiguous; qualify it with a table name or alias"
            ))),
        }
    }

    fn bind(&self, e: &Expr, allow_agg: bool) -> Result<BoundExpr, SqlError> {
        let b = |x: &Expr| self.bind(x, allow_agg).map(Box::new);
        Ok(match e {
            Expr::Column { qualifier, name } => BoundExpr::Slot(self.resolve(qualifier.as_deref(), name)?),
            Expr::Quoted(s) => match self.resolve(None, s) {
                Ok(slot) => BoundExpr::Slot(slot),
                Err(_) => BoundExpr::Literal(Value::string(s.as_str())),
            },
            Expr::Literal(v) => BoundExpr::Literal(v.clone()),
            Expr::Param(p) => match self.params {
                None => BoundExpr::Literal(Value::Null),
                Some(params) => match params.get(p) {
                    Some(v) => BoundExpr::Literal(v.clone()),
                    None => return Err(SqlError::bind(format!("no value supplied for parameter ${p}"))),
                },
            },
            Expr::Unary { op, expr } => BoundExpr::Unary { op: *op, expr: b(expr)? },
            Expr::Binary { op, left, right } => BoundExpr::Binary {
                op: *op,
                left: b(left)?,
                right: b(right)?,
            },
            Expr::IsNull { expr, negated } => BoundExpr::IsNull {
                expr: b(expr)?,
                negated: *negated,
            },
            Expr::InList { expr, list, negated } => BoundExpr::InList {
                expr: b(expr)?,
                list: list.iter().map(|x| self.bind(x, allow_agg)).collect::<Result<_, _>>()?,
                negated: *negated,
            },
            Expr::Between {
                expr,
                low,
                high,
                negated,
            } => BoundExpr::Between {
                expr: b(expr)?,
                low: b(low)?,
                high: b(high)?,
                negated: *negated,
            },
            Expr::Like { expr, pattern, negated } => BoundExpr::Like {
                expr: b(expr)?,
                pattern: b(pattern)?,
                negated: *negated,
            },
            Expr::Case {
                operand,
                branches,
                otherwise,
            } => BoundExpr::Case {
                operand: operand.as_deref().map(b).transpose()?,
                branches: branches
                    .iter()
                    .map(|(w, t)| Ok((self.bind(w, allow_agg)?, self.bind(t, allow_agg)?)))
                    .collect::<Result<_, SqlError>>()?,
                otherwise: otherwise.as_deref().map(b).transpose()?,
            },
            Expr::Cast { expr, to } => BoundExpr::Cast { expr: b(expr)?, to: *to },
            Expr::Function {
                name,
                args,
                distinct,
                star,
            } => self.bind_call(name, args, *distinct, *star, allow_agg)?,
        })
    }

    fn bind_call(
        &self,
        name: &str,
        args: &[Expr],
        distinct: bool,
        star: bool,
        allow_agg: bool,
    ) -> Result<BoundExpr, SqlError> {
        if let Some(func) = AggFunc::lookup(name) {
            if !allow_agg {
                return Err(SqlError::bind(format!(
                    "aggregate {}() is not allowed here (WHERE, JOIN ... ON, GROUP BY or inside another aggregate)",
                    func.name()
                )));
            }
            if star {
                if func != AggFunc::Count {
                    return Err(SqlError::bind(format!("{}(*) is not valid; only COUNT(*)", func.name())));
                }
                return Ok(BoundExpr::Agg {
                    func,
                    arg: None,
                    distinct: false,
                });
            }
            if args.len() != 1 {
                return Err(SqlError::bind(format!(
                    "{}() takes exactly 1 argument, got {}",
                    func.name(),
                    args.len()
                )));
            }
            return Ok(BoundExpr::Agg {
                func,
                arg: Some(Box::new(self.bind(&args[0], false)?)),
                distinct,
            });
        }
        if star {
            return Err(SqlError::bind(format!("{name}(*) is only valid for COUNT")));
        }
        if distinct {
            return Err(SqlError::bind(format!("DISTINCT is only valid inside aggregates, not {name}()")));
        }
        let bound: Vec<BoundExpr> = args.iter().map(|a| self.bind(a, allow_agg)).collect::<Result<_, _>>()?;
        if let Some(func) = Scalar::lookup(name) {
            let (lo, hi) = func.arity();
            if bound.len() < lo || bound.len() > hi {
                let expected = if lo == hi {
                    format!("{lo}")
                } else if hi == usize::MAX {
                    format!("at least {lo}")
                } else {
                    format!("{lo} to {hi}")
                };
                return Err(SqlError::bind(format!(
                    "{}() takes {expected} argument(s), got {}",
                    func.name(),
                    bound.len()
                )));
            }
            return Ok(BoundExpr::Scalar { func, args: bound });
        }
        if let Some(udf) = self.catalog.udfs.get(&name.to_ascii_lowercase()) {
            if !udf.arity.accepts(bound.len()) {
                return Err(SqlError::bind(format!(
                    "{}() takes {} argument(s), got {}",
                    udf.name,
                    udf.arity,
                    bound.len()
                )));
            }
            return Ok(BoundExpr::Udf {
                name: udf.name.to_ascii_lowercase(),
                args: bound,
            });
        }
        let names = self.catalog.function_names();
        Err(SqlError::UnknownFunction {
            name: name.to_string(),
            suggestion: suggest(name, names.iter().map(String::as_str)),
        })
    }
}

/// Collects UDF calls into a Map stage, replacing each with a slot.
struct UdfExtractor<'a> {
    catalog: &'a Catalog,
    base: usize,
    calls: Vec<UdfCall>,
    keys: Vec<(String, Vec<BoundExpr>)>,
}

impl<'a> UdfExtractor<'a> {
    fn new(catalog: &'a Catalog, base: usize) -> Self {
        Self {
            catalog,
            base,
            calls: vec![],
            keys: vec![],
        }
    }

    fn extract(&mut self, e: BoundExpr) -> Result<BoundExpr, SqlError> {
        // Children first so nested calls get lower slots than their consumers.
        let e = e.try_map_children(&mut |c| self.extract(c))?;
        let BoundExpr::Udf { name, args } = e else {
            return Ok(e);
        };
        let idx = match self.keys.iter().position(|(n, a)| *n == name && *a == args) {
            Some(i) => i,
            None => {
                let def = self
                    .catalog
                    .udfs
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| SqlError::UnknownFunction {
                        name: name.clone(),
                        suggestion: None,
                    })?;
                self.keys.push((name, args.clone()));
                self.calls.push(UdfCall { def, args });
                self.calls.len() - 1
            }
        };
        Ok(BoundExpr::Slot(self.base + idx))
    }

    /// Largest concurrency cap among async UDFs `e` depends on, directly or through other UDFs.
    fn async_cap(&self, e: &BoundExpr) -> usize {
        let mut slots = Vec::new();
        e.slots(&mut slots);
        let mut cap = 0;
        let mut seen = vec![false; self.calls.len()];
        while let Some(s) = slots.pop() {
            if s < self.base || s - self.base >= self.calls.len() || seen[s - self.base] {
                continue;
            }
            seen[s - self.base] = true;
            let call = &self.calls[s - self.base];
            if call.def.kind() == UdfKind::Async {
                cap = cap.max(call.def.concurrency_cap());
            }
            for a in &call.args {
                a.slots(&mut slots);
            }
        }
        cap
    }

    fn wrap(self, input: PlanNode) -> PlanNode {
        if self.calls.is_empty() {
            input
        } else {
            PlanNode::Map {
                input: Box::new(input),
                udfs: self.calls,
            }
        }
    }
}

fn conjuncts(e: &BoundExpr, out: &mut Vec<BoundExpr>) {
    match e {
        BoundExpr::Binary {
            op: BinaryOp::And,
            left,
            right,
        } => {
            conjuncts(left, out);
            conjuncts(right, out);
        }
        other => out.push(other.clone()),
    }
}

fn compare_op(op: BinaryOp) -> Option<CompareOp> {
    Some(match op {
        BinaryOp::Eq => CompareOp::Eq,
        BinaryOp::Lt => CompareOp::Lt,
        BinaryOp::LtEq => CompareOp::LtEq,
        BinaryOp::Gt => CompareOp::Gt,
        BinaryOp::GtEq => CompareOp::GtEq,
        _ => return None,
    })
}

/// `slot op literal` in either orientation.
fn simple_comparison(e: &BoundExpr) -> Option<(usize, CompareOp, Value)> {
    let BoundExpr::Binary { op, left, right } = e else {
        return None;
    };
    let op = compare_op(*op)?;
    match (&**left, &**right) {
        (BoundExpr::Slot(s), BoundExpr::Literal(v)) if !v.is_null() => Some((*s, op, v.clone())),
        (BoundExpr::Literal(v), BoundExpr::Slot(s)) if !v.is_null() => Some((*s, op.flip(), v.clone())),
        _ => None,
    }
}

fn output_name(e: &Expr) -> String {
    match e {
        Expr::Column { name, .. } => name.clone(),
        Expr::Quoted(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Binds and plans a parsed statement. With `params == None`, parameters bind
/// as NULL placeholders (plan inspection only).
pub(crate) fn plan_select(stmt: &Select, catalog: &Catalog, params: Option<&Params>) -> Result<LogicalPlan, SqlError> {
    let mut binder = Binder {
        catalog,
        params,
        tables: vec![],
    };

    // FROM and JOIN scopes.
    let mut refs = Vec::new();
    if let Some(from) = &stmt.from {
        refs.push(from);
    }
    refs.extend(stmt.joins.iter().map(|j| &j.table));
    for r in &refs {
        let (name, backend) = catalog.table(&r.name, "", r.pos)?;
        if binder.tables.iter().any(|t| t.binding.eq_ignore_ascii_case(r.binding())) {
            return Err(SqlError::bind(format!(
                "table name '{}' is used twice; give one an alias",
                r.binding()
            )));
        }
        let offset = binder.width();
        binder.tables.push(ScopeTable {
            binding: r.alias.clone().unwrap_or_else(|| name.clone()),
            name,
            columns: backend.columns().iter().map(|c| c.name.clone()).collect(),
            backend,
            offset,
        });
    }
    let base_width = binder.width();

    // Join keys, in the combined layout (right keys rebased later).
    let mut join_keys: Vec<(Vec<BoundExpr>, Vec<BoundExpr>)> = Vec::new();
    for (ji, join) in stmt.joins.iter().enumerate() {
        let right = &binder.tables[ji + 1];
        let (lo, hi) = (right.offset, right.offset + right.columns.len());
        let on = binder.bind(&join.on, false)?;
        if on.contains_udf() {
            return Err(SqlError::bind("JOIN ... ON cannot call UDFs"));
        }
        let mut parts = Vec::new();
        conjuncts(&on, &mut parts);
        let (mut lk, mut rk) = (Vec::new(), Vec::new());
        for p in parts {
            let bad = || {
                SqlError::bind(format!(
                    "JOIN ... ON supports only equalities between the two sides, got {}",
                    join.on
                ))
            };
            let BoundExpr::Binary {
                op: BinaryOp::Eq,
                left,
                right,
            } = p
            else {
                return Err(bad());
            };
            let side = |e: &BoundExpr| {
                let mut s = Vec::new();
                e.slots(&mut s);
                if s.is_empty() {
                    None
                } else if s.iter().all(|x| *x >= lo && *x < hi) {
                    Some(true)
                } else if s.iter().all(|x| *x < lo) {
                    Some(false)
                } else {
                    None
                }
            };
            match (side(&left), side(&right)) {
                (Some(false), Some(true)) => {
                    lk.push(*left);
                    rk.push(*right);
                }
                (Some(true), Some(false)) => {
                    lk.push(*right);
                    rk.push(*left);
                }
                _ => return Err(bad()),
            }
        }
        join_keys.push((lk, rk));
    }

    // Select list.
    let mut items: Vec<(Option<Expr>, BoundExpr, String)> = Vec::new();
    for item in &stmt.items {
        match item {
            SelectItem::Wildcard { qualifier } => {
                let tables: Vec<&ScopeTable> = match qualifier {
                    None => binder.tables.iter().collect(),
                    Some(q) => {
                        let t: Vec<&ScopeTable> =
                            binder.tables.iter().filter(|t| t.binding.eq_ignore_ascii_case(q)).collect();
                        if t.is_empty() {
                            return Err(SqlError::bind(format!("unknown table or alias '{q}' in '{q}.*'")));
                        }
                        t
                    }
                };
                if tables.is_empty() {
                    return Err(SqlError::bind("SELECT * needs a FROM clause"));
                }
                for t in tables {
                    for (i, c) in t.columns.iter().enumerate() {
                        items.push((None, BoundExpr::Slot(t.offset + i), c.clone()));
                    }
                }
            }
            SelectItem::Expr { expr, alias } => {
                let bound = binder.bind(expr, true)?;
                let name = alias.clone().unwrap_or_else(|| output_name(expr));
                items.push((Some(expr.clone()), bound, name));
            }
        }
    }

    // ORDER BY / GROUP BY may name a select item by ordinal or alias.
    let by_item = |e: &Expr| -> Option<Result<BoundExpr, SqlError>> {
        match e {
            Expr::Literal(Value::Int(k)) => Some(if *k >= 1 && (*k as usize) <= items.len() {
                Ok(items[*k as usize - 1].1.clone())
            } else {
                Err(SqlError::bind(format!(
                    "position {k} is not in the select list (1..{})",
                    items.len()
                )))
            }),
            Expr::Column { qualifier: None, name } | Expr::Quoted(name) => {
                // A real column wins over an alias of the same name.
                if binder.resolve(None, name).is_ok() {
                    return None;
                }
                items
                    .iter()
                    .find(|(src, _, n)| src.is_some() && n.eq_ignore_ascii_case(name))
                    .map(|(_, b, _)| Ok(b.clone()))
            }
            _ => None,
        }
    };

    let selection = stmt.selection.as_ref().map(|w| binder.bind(w, false)).transpose()?;
    let mut order: Vec<(BoundExpr, bool)> = Vec::new();
    for o in &stmt.order_by {
        let e = match by_item(&o.expr) {
            Some(r) => r?,
            None => binder.bind(&o.expr, true)?,
        };
        order.push((e, o.desc));
    }
    let mut group: Vec<BoundExpr> = Vec::new();
    for g in &stmt.group_by {
        let e = match by_item(g) {
            Some(r) => r?,
            None => binder.bind(g, false)?,
        };
        if e.contains_agg() {
            return Err(SqlError::bind("GROUP BY cannot contain aggregates"));
        }
        group.push(e);
    }
    let having = stmt.having.as_ref().map(|h| binder.bind(h, true)).transpose()?;

    let aggregate = !group.is_empty()
        || having.is_some()
        || items.iter().any(|(_, b, _)| b.contains_agg())
        || order.iter().any(|(e, _)| e.contains_agg());
    if stmt.distinct && aggregate {
        return Err(SqlError::bind("SELECT DISTINCT cannot be combined with GROUP BY or aggregates"));
    }
    if stmt.distinct {
        group = items.iter().map(|(_, b, _)| b.clone()).collect();
    }
    let aggregate = aggregate || stmt.distinct;

    let mut pre = UdfExtractor::new(catalog, base_width);
    // Base-layout expressions, used to work out which columns are read.
    let mut pre_exprs: Vec<BoundExpr> = Vec::new();
    let columns: Vec<String> = items.iter().map(|(_, _, n)| n.clone()).collect();
    let filter = selection.map(|w| pre.extract(w)).transpose()?;
    pre_exprs.extend(filter.clone());
    let filter_window = filter.as_ref().map_or(1, |f| pre.async_cap(f).max(1));

    struct AggStage<'c> {
        group: Vec<BoundExpr>,
        aggs: Vec<AggCall>,
        window: usize,
        post: UdfExtractor<'c>,
        having: Option<(BoundExpr, usize)>,
    }

    let output: Vec<BoundExpr>;
    let keys: Vec<(BoundExpr, bool)>;
    let sort_window: usize;
    let sink_window: usize;
    let mut agg_stage: Option<AggStage<'_>> = None;

    if !aggregate {
        output = items
            .into_iter()
            .map(|(_, b, _)| pre.extract(b))
            .collect::<Result<_, _>>()?;
        keys = order
            .into_iter()
            .map(|(e, d)| Ok((pre.extract(e)?, d)))
            .collect::<Result<_, SqlError>>()?;
        pre_exprs.extend(output.iter().cloned());
        pre_exprs.extend(keys.iter().map(|(k, _)| k.clone()));
        sort_window = window_for(keys.iter().map(|(k, _)| pre.async_cap(k)));
        sink_window = output.iter().map(|e| pre.async_cap(e)).max().unwrap_or(0).max(1);
    } else {
        // Lift post-aggregation expressions onto [group keys..., aggregates...].
        let mut aggs: Vec<AggCall> = Vec::new();
        let lifted_items: Vec<BoundExpr> = items
            .into_iter()
            .map(|(_, b, _)| lift(b, &group, &mut aggs, &binder))
            .collect::<Result<_, _>>()?;
        let lifted_having = having.map(|h| lift(h, &group, &mut aggs, &binder)).transpose()?;
        let lifted_order: Vec<(BoundExpr, bool)> = order
            .into_iter()
            .map(|(e, d)| Ok((lift(e, &group, &mut aggs, &binder)?, d)))
            .collect::<Result<_, SqlError>>()?;

        let group_pre: Vec<BoundExpr> = group.into_iter().map(|g| pre.extract(g)).collect::<Result<_, _>>()?;
        let aggs_pre: Vec<AggCall> = aggs
            .into_iter()
            .map(|a| {
                Ok(AggCall {
                    arg: a.arg.map(|x| pre.extract(x)).transpose()?,
                    ..a
                })
            })
            .collect::<Result<_, SqlError>>()?;
        pre_exprs.extend(group_pre.iter().cloned());
        pre_exprs.extend(aggs_pre.iter().filter_map(|a| a.arg.clone()));
        let window = window_for(
            group_pre
                .iter()
                .chain(aggs_pre.iter().filter_map(|a| a.arg.as_ref()))
                .map(|e| pre.async_cap(e)),
        );

        let mut post = UdfExtractor::new(catalog, group_pre.len() + aggs_pre.len());
        output = lifted_items
            .into_iter()
            .map(|e| post.extract(e))
            .collect::<Result<_, _>>()?;
        let having = lifted_having.map(|h| post.extract(h)).transpose()?;
        keys = lifted_order
            .into_iter()
            .map(|(e, d)| Ok((post.extract(e)?, d)))
            .collect::<Result<_, SqlError>>()?;
        sort_window = window_for(keys.iter().map(|(k, _)| post.async_cap(k)));
        sink_window = output.iter().map(|e| post.async_cap(e)).max().unwrap_or(0).max(1);
        let having = having.map(|h| {
            let w = post.async_cap(&h).max(1);
            (h, w)
        });
        agg_stage = Some(AggStage {
            group: group_pre,
            aggs: aggs_pre,
            window,
            post,
            having,
        });
    }

    // Column needs per table. UDF arguments read base columns too.
    let mut slots = Vec::new();
    for e in pre_exprs
        .iter()
        .chain(pre.calls.iter().flat_map(|c| c.args.iter()))
        .chain(join_keys.iter().flat_map(|(l, r)| l.iter().chain(r.iter())))
    {
        e.slots(&mut slots);
    }
    let mut requests: Vec<ScanRequest> = binder
        .tables
        .iter()
        .map(|t| ScanRequest {
            columns: vec![false; t.columns.len()],
            predicates: vec![],
        })
        .collect();
    for s in slots {
        if let Some((t, c)) = binder.table_of_slot(s) {
            requests[t].columns[c] = true;
        }
    }

    // Pushdown of `column op literal` conjuncts; the filter still runs afterwards.
    if let Some(f) = &filter {
        let mut parts = Vec::new();
        conjuncts(f, &mut parts);
        for p in &parts {
            let Some((slot, op, value)) = simple_comparison(p) else {
                continue;
            };
            let Some((t, column)) = binder.table_of_slot(slot) else {
                continue;
            };
            if binder.tables[t].backend.accepts_pushdown() {
                requests[t].predicates.push(PushdownPredicate { column, op, value });
            }
        }
    }

    // Scans and joins.
    let mut scans = binder
        .tables
        .iter()
        .zip(requests)
        .map(|(t, request)| PlanNode::Scan {
            table: t.name.clone(),
            backend: t.backend.clone(),
            request,
        });
    let mut node = scans.next().unwrap_or(PlanNode::Empty);
    let mut left_estimate = binder.tables.first().and_then(|t| t.backend.estimated_rows());
    for (ji, ((lk, rk), join)) in join_keys.into_iter().zip(&stmt.joins).enumerate() {
        let right_table = &binder.tables[ji + 1];
        let right_estimate = right_table.backend.estimated_rows();
        let build_left = join.kind == JoinKind::Inner
            && matches!((left_estimate, right_estimate), (Some(l), Some(r)) if l < r);
        let offset = right_table.offset;
        let rk = rk
            .into_iter()
            .map(|k| rebase(k, offset))
            .collect::<Vec<_>>();
        node = PlanNode::Join {
            left: Box::new(node),
            right: Box::new(scans.next().expect("one scan per table")),
            kind: join.kind,
            left_keys: lk,
            right_keys: rk,
            build_left,
            left_width: offset,
            right_width: right_table.columns.len(),
        };
        left_estimate = match (left_estimate, right_estimate) {
            (Some(l), Some(r)) => Some(l.max(r)),
            _ => None,
        };
    }

    node = pre.wrap(node);
    if let Some(predicate) = filter {
        node = PlanNode::Filter {
            input: Box::new(node),
            predicate,
            window: filter_window,
        };
    }
    if let Some(stage) = agg_stage {
        node = PlanNode::Aggregate {
            input: Box::new(node),
            group: stage.group,
            aggs: stage.aggs,
            window: stage.window,
        };
        node = stage.post.wrap(node);
        if let Some((predicate, window)) = stage.having {
            node = PlanNode::Filter {
                input: Box::new(node),
                predicate,
                window,
            };
        }
    }
    if !keys.is_empty() {
        node = PlanNode::Sort {
            input: Box::new(node),
            keys,
            window: sort_window,
        };
    }
    let offset = stmt.offset.unwrap_or(0);
    if stmt.limit.is_some() || offset > 0 {
        node = PlanNode::Limit {
            input: Box::new(node),
            limit: stmt.limit,
            offset,
        };
    }

    let path = if node.has_buffering() {
        ExecPath::Buffered
    } else {
        ExecPath::Streaming
    };
    Ok(LogicalPlan {
        root: node,
        output,
        columns,
        path,
        sink_window,
    })
}

fn window_for(caps: impl Iterator<Item = usize>) -> usize {
    caps.map(|c| c * 2).max().unwrap_or(0).max(MIN_BUFFER_WINDOW)
}

fn rebase(e: BoundExpr, offset: usize) -> BoundExpr {
    match e {
        BoundExpr::Slot(s) => BoundExpr::Slot(s - offset),
        other => other
            .try_map_children(&mut |c| Ok::<_, SqlError>(rebase(c, offset)))
            .expect("infallible"),
    }
}

fn lift(
    e: BoundExpr,
    group: &[BoundExpr],
    aggs: &mut Vec<AggCall>,
    binder: &Binder<'_>,
) -> Result<BoundExpr, SqlError> {
    if let Some(i) = group.iter().position(|g| *g == e) {
        return Ok(BoundExpr::Slot(i));
    }
    match e {
        BoundExpr::Agg { func, arg, distinct } => {
            let call = AggCall {
                func,
                arg: arg.map(|a| *a),
                distinct,
            };
            let idx = match aggs.iter().position(|a| *a == call) {
                Some(i) => i,
                None => {
                    aggs.push(call);
                    aggs.len() - 1
                }
            };
            Ok(BoundExpr::Slot(group.len() + idx))
        }
        BoundExpr::Slot(s) => Err(SqlError::bind(format!(
            "column '{}' must appear in GROUP BY or be used in an aggregate",
            binder.slot_name(s)
        ))),
        other => other.try_map_children(&mut |c| lift(c, group, aggs, binder)),
    }
}
