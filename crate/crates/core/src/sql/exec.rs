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

//! Pull-based operators and the query handle.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use async_trait::async_trait;
use futures::StreamExt;
use tokio_util::sync::CancellationToken;

use super::ast::JoinKind;
use super::backend::RowStream;
use super::cell::{DeferredCell, ExecCtx, OrderedWindow};
use super::error::SqlError;
use super::expr::{eval, eval_all, eval_predicate, AggFunc, BoundExpr};
use super::plan::{AggCall, ExecPath, LogicalPlan, PlanNode, UdfCall};
use super::stats::ExecStats;
use crate::value::{key_cmp, sql_cmp, KeyValue, Value};

type Row = Vec<DeferredCell>;
type RowResult = Result<Row, SqlError>;

/// Default ceiling on rows held by a sort, aggregate or join build side.
pub const DEFAULT_MAX_BUFFERED_ROWS: usize = 1_000_000;

#[async_trait]
trait Operator: Send {
    async fn next(&mut self) -> Option<RowResult>;
}

struct Source(RowStream);

#[async_trait]
impl Operator for Source {
    async fn next(&mut self) -> Option<RowResult> {
        self.0.next().await
    }
}

struct Once(bool);

#[async_trait]
impl Operator for Once {
    async fn next(&mut self) -> Option<RowResult> {
        std::mem::replace(&mut self.0, false).then(|| Ok(Vec::new()))
    }
}

/// Appends one unevaluated cell per UDF call. Nothing runs until a cell is forced.
struct Map {
    input: Box<dyn Operator>,
    udfs: Arc<Vec<UdfCall>>,
}

#[async_trait]
impl Operator for Map {
    async fn next(&mut self) -> Option<RowResult> {
        let mut row = match self.input.next().await? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        for i in 0..self.udfs.len() {
            let udfs = self.udfs.clone();
            let prefix: Arc<[DeferredCell]> = row.as_slice().into();
            let cost = udfs[i].def.cost_class();
            row.push(DeferredCell::new(cost, move |ctx| async move {
                let call = &udfs[i];
                let mut args = Vec::with_capacity(call.args.len());
                for a in &call.args {
                    args.push(eval(a, &prefix, &ctx).await?);
                }
                call.def.invoke(args, &ctx).await
            }));
        }
        Some(Ok(row))
    }
}

/// Pulls until the window is full or the input ends, then hands back the oldest entry.
async fn refill<T, F, Fut>(
    input: &mut Option<Box<dyn Operator>>,
    window: &mut OrderedWindow<Result<T, SqlError>>,
    mut task: F,
) -> Option<Result<T, SqlError>>
where
    T: Send + 'static,
    F: FnMut(Row) -> Fut,
    Fut: std::future::Future<Output = Result<T, SqlError>> + Send + 'static,
{
    while !window.is_full() {
        let Some(op) = input.as_mut() else { break };
        match op.next().await {
            Some(Ok(row)) => window.push(task(row)),
            Some(Err(e)) => {
                window.push(async move { Err(e) });
                *input = None;
            }
            None => *input = None,
        }
    }
    window.pop().await
}

struct Filter {
    input: Option<Box<dyn Operator>>,
    predicate: Arc<BoundExpr>,
    window: Option<OrderedWindow<Result<Option<Row>, SqlError>>>,
    ctx: ExecCtx,
}

#[async_trait]
impl Operator for Filter {
    async fn next(&mut self) -> Option<RowResult> {
        loop {
            let Some(window) = self.window.as_mut() else {
                // Inline evaluation: nothing in the predicate is worth overlapping.
                let row = match self.input.as_mut()?.next().await? {
                    Ok(r) => r,
                    Err(e) => return Some(Err(e)),
                };
                match eval_predicate(&self.predicate, &row, &self.ctx).await {
                    Ok(true) => return Some(Ok(row)),
                    Ok(false) => continue,
                    Err(e) => return Some(Err(e)),
                }
            };
            let (pred, ctx) = (self.predicate.clone(), self.ctx.clone());
            let settled = refill(&mut self.input, window, |row| {
                let (pred, ctx) = (pred.clone(), ctx.clone());
                async move { Ok(eval_predicate(&pred, &row, &ctx).await?.then_some(row)) }
            })
            .await?;
            match settled {
                Ok(Some(row)) => return Some(Ok(row)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

struct Limit {
    input: Option<Box<dyn Operator>>,
    skip: u64,
    remaining: Option<u64>,
}

#[async_trait]
impl Operator for Limit {
    async fn next(&mut self) -> Option<RowResult> {
        loop {
            if self.remaining == Some(0) {
                // Release the input so upstream windows stop work early.
                self.input = None;
                return None;
            }
            let row = match self.input.as_mut()?.next().await? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            if self.skip > 0 {
                self.skip -= 1;
                continue;
            }
            if let Some(r) = self.remaining.as_mut() {
                *r -= 1;
            }
            return Some(Ok(row));
        }
    }
}

/// Evaluates `exprs` over every input row through an ordered window.
async fn drain_evaluated(
    input: Box<dyn Operator>,
    exprs: Arc<Vec<BoundExpr>>,
    window: usize,
    ctx: &ExecCtx,
    mut sink: impl FnMut(Row, Vec<Value>) -> Result<(), SqlError>,
) -> Result<(), SqlError> {
    let mut input = Some(input);
    let mut win = OrderedWindow::new(window);
    loop {
        let settled = refill(&mut input, &mut win, |row| {
            let (exprs, ctx) = (exprs.clone(), ctx.clone());
            async move {
                let values = eval_all(exprs, row.as_slice().into(), ctx).await?;
                Ok((row, values))
            }
        })
        .await;
        match settled {
            None => return Ok(()),
            Some(Ok((row, values))) => sink(row, values)?,
            Some(Err(e)) => return Err(e),
        }
    }
}

fn too_many(what: &str, limit: usize) -> SqlError {
    SqlError::ResourceExceeded(format!(
        "{what} would buffer more than {limit} rows; add a LIMIT or narrow the query"
    ))
}

/// Tracks rows held by a buffering operator in the stats gauge.
struct BufferGauge {
    stats: Arc<ExecStats>,
    held: u64,
}

impl BufferGauge {
    fn add(&mut self, n: u64) {
        self.held += n;
        self.stats.buffer_add(n);
    }

    fn sub(&mut self, n: u64) {
        let n = n.min(self.held);
        self.held -= n;
        self.stats.buffer_sub(n);
    }
}

impl Drop for BufferGauge {
    fn drop(&mut self) {
        self.stats.buffer_sub(self.held);
    }
}

/// NULLs sort last in both directions; DESC reverses non-null values only.
fn order_keys(a: &[Value], b: &[Value], desc: &[bool]) -> Ordering {
    for ((x, y), d) in a.iter().zip(b).zip(desc) {
        let c = match (x.is_null(), y.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) if *d => key_cmp(y, x),
            (false, false) => key_cmp(x, y),
        };
        if c != Ordering::Equal {
            return c;
        }
    }
    Ordering::Equal
}

struct Sort {
    input: Option<Box<dyn Operator>>,
    keys: Arc<Vec<BoundExpr>>,
    desc: Vec<bool>,
    window: usize,
    max_rows: usize,
    ctx: ExecCtx,
    sorted: Option<(std::vec::IntoIter<Row>, BufferGauge)>,
}

#[async_trait]
impl Operator for Sort {
    async fn next(&mut self) -> Option<RowResult> {
        if self.sorted.is_none() {
            let input = self.input.take()?;
            let mut gauge = BufferGauge {
                stats: self.ctx.stats.clone(),
                held: 0,
            };
            let mut rows: Vec<(Vec<Value>, Row)> = Vec::new();
            let max = self.max_rows;
            let res = drain_evaluated(input, self.keys.clone(), self.window, &self.ctx, |row, keys| {
                if rows.len() >= max {
                    return Err(too_many("ORDER BY", max));
                }
                gauge.add(1);
                rows.push((keys, row));
                Ok(())
            })
            .await;
            if let Err(e) = res {
                return Some(Err(e));
            }
            // Vec::sort_by is stable.
            rows.sort_by(|a, b| order_keys(&a.0, &b.0, &self.desc));
            let rows: Vec<Row> = rows.into_iter().map(|(_, r)| r).collect();
            self.sorted = Some((rows.into_iter(), gauge));
        }
        let (iter, gauge) = self.sorted.as_mut()?;
        let row = iter.next()?;
        gauge.sub(1);
        Some(Ok(row))
    }
}

enum Acc {
    Count(u64),
    Sum { int: i64, float: f64, is_float: bool, any: bool },
    Avg { sum: f64, n: u64 },
    Min(Option<Value>),
    Max(Option<Value>),
}

impl Acc {
    fn new(func: AggFunc) -> Self {
        match func {
            AggFunc::Count => Acc::Count(0),
            AggFunc::Sum => Acc::Sum {
                int: 0,
                float: 0.0,
                is_float: false,
                any: false,
            },
            AggFunc::Avg => Acc::Avg { sum: 0.0, n: 0 },
            AggFunc::Min => Acc::Min(None),
            AggFunc::Max => Acc::Max(None),
        }
    }

    fn numeric(func: &str, v: &Value) -> Result<(), SqlError> {
        match v {
            Value::Int(_) | Value::Float(_) | Value::Decimal(_) => Ok(()),
            other => Err(SqlError::Type(format!(
                "{func}() needs numeric input, got {} (use CAST to convert)",
                other.type_name()
            ))),
        }
    }

    /// `v` is `None` for COUNT(*).
    fn update(&mut self, v: Option<&Value>) -> Result<(), SqlError> {
        let Some(v) = v else {
            if let Acc::Count(n) = self {
                *n += 1;
            }
            return Ok(());
        };
        if v.is_null() {
            return Ok(());
        }
        match self {
            Acc::Count(n) => *n += 1,
            Acc::Sum {
                int,
                float,
                is_float,
                any,
            } => {
                Self::numeric("SUM", v)?;
                *any = true;
                match v {
                    Value::Int(i) if !*is_float => match int.checked_add(*i) {
                        Some(s) => *int = s,
                        None => return Err(SqlError::Eval("integer overflow in SUM()".into())),
                    },
                    other => {
                        if !*is_float {
                            *is_float = true;
                            *float = *int as f64;
                        }
                        *float += other.as_f64().unwrap_or(0.0);
                    }
                }
            }
            Acc::Avg { sum, n } => {
                Self::numeric("AVG", v)?;
                *sum += v.as_f64().unwrap_or(0.0);
                *n += 1;
            }
            Acc::Min(_) | Acc::Max(_) => {
                let keep_less = matches!(self, Acc::Min(_));
                let (Acc::Min(cur) | Acc::Max(cur)) = self else { unreachable!() };
                match cur {
                    None => *cur = Some(v.clone()),
                    Some(c) => {
                        let ord = sql_cmp(v, c).ok_or_else(|| {
                            SqlError::Type(format!(
                                "cannot compare {} with {} in MIN/MAX",
                                v.type_name(),
                                c.type_name()
                            ))
                        })?;
                        if (ord == Ordering::Less) == keep_less && ord != Ordering::Equal {
                            *cur = Some(v.clone());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Value {
        match self {
            Acc::Count(n) => Value::Int(n as i64),
            Acc::Sum { any: false, .. } => Value::Null,
            Acc::Sum {
                float, is_float: true, ..
            } => Value::Float(float),
            Acc::Sum { int, .. } => Value::Int(int),
            Acc::Avg { n: 0, .. } => Value::Null,
            Acc::Avg { sum, n } => Value::Float(sum / n as f64),
            Acc::Min(v) | Acc::Max(v) => v.unwrap_or(Value::Null),
        }
    }
}

/// Aggregate state for one call, with DISTINCT de-duplication when asked.
struct AggState {
    acc: Acc,
    seen: Option<HashSet<KeyValue>>,
}

impl AggState {
    fn new(call: &AggCall) -> Self {
        Self {
            acc: Acc::new(call.func),
            seen: call.distinct.then(HashSet::new),
        }
    }

    fn update(&mut self, v: Option<&Value>) -> Result<(), SqlError> {
        if let (Some(seen), Some(v)) = (self.seen.as_mut(), v) {
            if v.is_null() || !seen.insert(KeyValue(v.clone())) {
                return Ok(());
            }
        }
        self.acc.update(v)
    }
}

struct Aggregate {
    input: Option<Box<dyn Operator>>,
    group: Vec<BoundExpr>,
    aggs: Vec<AggCall>,
    window: usize,
    max_rows: usize,
    ctx: ExecCtx,
    output: Option<std::vec::IntoIter<Row>>,
}

impl Aggregate {
    async fn run(&mut self, input: Box<dyn Operator>) -> Result<Vec<Row>, SqlError> {
        let ng = self.group.len();
        // Evaluate keys then aggregate arguments in one pass per row.
        let mut exprs = self.group.clone();
        let mut arg_index = Vec::with_capacity(self.aggs.len());
        for a in &self.aggs {
            arg_index.push(a.arg.as_ref().map(|e| {
                exprs.push(e.clone());
                exprs.len() - 1
            }));
        }
        let mut index: HashMap<Vec<KeyValue>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<Value>, Vec<AggState>)> = Vec::new();
        let mut gauge = BufferGauge {
            stats: self.ctx.stats.clone(),
            held: 0,
        };
        let (aggs, max) = (&self.aggs, self.max_rows);
        drain_evaluated(input, Arc::new(exprs), self.window, &self.ctx, |_, values| {
            let key: Vec<KeyValue> = values[..ng].iter().cloned().map(KeyValue).collect();
            let gi = match index.get(&key) {
                Some(i) => *i,
                None => {
                    if groups.len() >= max {
                        return Err(too_many("GROUP BY", max));
                    }
                    gauge.add(1);
                    groups.push((values[..ng].to_vec(), aggs.iter().map(AggState::new).collect()));
                    index.insert(key, groups.len() - 1);
                    groups.len() - 1
                }
            };
            for (state, ai) in groups[gi].1.iter_mut().zip(&arg_index) {
                state.update(ai.map(|i| &values[i]))?;
            }
            Ok(())
        })
        .await?;
        if groups.is_empty() && ng == 0 {
            groups.push((vec![], self.aggs.iter().map(AggState::new).collect()));
        }
        Ok(groups
            .into_iter()
            .map(|(keys, states)| {
                keys.into_iter()
                    .chain(states.into_iter().map(|s| s.acc.finish()))
                    .map(DeferredCell::resolved)
                    .collect()
            })
            .collect())
    }
}

#[async_trait]
impl Operator for Aggregate {
    async fn next(&mut self) -> Option<RowResult> {
        if self.output.is_none() {
            let input = self.input.take()?;
            match self.run(input).await {
                Ok(rows) => self.output = Some(rows.into_iter()),
                Err(e) => return Some(Err(e)),
            }
        }
        self.output.as_mut()?.next().map(Ok)
    }
}

struct HashJoin {
    build: Option<Box<dyn Operator>>,
    probe: Option<Box<dyn Operator>>,
    build_keys: Vec<BoundExpr>,
    probe_keys: Vec<BoundExpr>,
    build_is_left: bool,
    left_outer: bool,
    right_width: usize,
    max_rows: usize,
    ctx: ExecCtx,
    table: Option<(HashMap<Vec<KeyValue>, Vec<usize>>, Vec<Row>, BufferGauge)>,
    pending: VecDeque<Row>,
}

/// Join keys, or `None` when any is NULL (NULL never matches).
async fn join_key(keys: &[BoundExpr], row: &[DeferredCell], ctx: &ExecCtx) -> Result<Option<Vec<KeyValue>>, SqlError> {
    let mut out = Vec::with_capacity(keys.len());
    for k in keys {
        let v = eval(k, row, ctx).await?;
        if v.is_null() {
            return Ok(None);
        }
        out.push(KeyValue(v));
    }
    Ok(Some(out))
}

impl HashJoin {
    async fn build_table(&mut self) -> Result<(), SqlError> {
        let mut input = self.build.take().expect("built once");
        let mut index: HashMap<Vec<KeyValue>, Vec<usize>> = HashMap::new();
        let mut rows = Vec::new();
        let mut gauge = BufferGauge {
            stats: self.ctx.stats.clone(),
            held: 0,
        };
        while let Some(row) = input.next().await {
            let row = row?;
            if rows.len() >= self.max_rows {
                return Err(too_many("JOIN build side", self.max_rows));
            }
            if let Some(key) = join_key(&self.build_keys, &row, &self.ctx).await? {
                gauge.add(1);
                index.entry(key).or_default().push(rows.len());
                rows.push(row);
            }
        }
        self.table = Some((index, rows, gauge));
        Ok(())
    }
}

#[async_trait]
impl Operator for HashJoin {
    async fn next(&mut self) -> Option<RowResult> {
        if self.table.is_none() {
            if let Err(e) = self.build_table().await {
                self.probe = None;
                return Some(Err(e));
            }
        }
        loop {
            if let Some(row) = self.pending.pop_front() {
                return Some(Ok(row));
            }
            let probe = match self.probe.as_mut()?.next().await {
                None => {
                    self.probe = None;
                    return None;
                }
                Some(Err(e)) => return Some(Err(e)),
                Some(Ok(r)) => r,
            };
            let key = match join_key(&self.probe_keys, &probe, &self.ctx).await {
                Ok(k) => k,
                Err(e) => return Some(Err(e)),
            };
            let (index, rows, _) = self.table.as_ref().expect("table built");
            let matches = key.as_ref().and_then(|k| index.get(k));
            match matches {
                Some(hits) => {
                    for &i in hits {
                        let build = &rows[i];
                        let combined = if self.build_is_left {
                            build.iter().chain(&probe).cloned().collect()
                        } else {
                            probe.iter().chain(build).cloned().collect()
                        };
                        self.pending.push_back(combined);
                    }
                }
                None if self.left_outer => {
                    let mut combined = probe;
                    combined.extend((0..self.right_width).map(|_| DeferredCell::null()));
                    self.pending.push_back(combined);
                }
                None => {}
            }
        }
    }
}

fn build(node: PlanNode, ctx: &ExecCtx, max_rows: usize) -> Box<dyn Operator> {
    match node {
        PlanNode::Empty => Box::new(Once(true)),
        PlanNode::Scan { backend, request, .. } => Box::new(Source(backend.scan(request, ctx.clone()))),
        PlanNode::Join {
            left,
            right,
            kind,
            left_keys,
            right_keys,
            build_left,
            right_width,
            ..
        } => {
            let (l, r) = (build(*left, ctx, max_rows), build(*right, ctx, max_rows));
            let (build_op, probe_op, build_keys, probe_keys) = if build_left {
                (l, r, left_keys, right_keys)
            } else {
                (r, l, right_keys, left_keys)
            };
            Box::new(HashJoin {
                build: Some(build_op),
                probe: Some(probe_op),
                build_keys,
                probe_keys,
                build_is_left: build_left,
                left_outer: kind == JoinKind::Left,
                right_width,
                max_rows,
                ctx: ctx.clone(),
                table: None,
                pending: VecDeque::new(),
            })
        }
        PlanNode::Map { input, udfs } => Box::new(Map {
            input: build(*input, ctx, max_rows),
            udfs: Arc::new(udfs),
        }),
        PlanNode::Filter {
            input,
            predicate,
            window,
        } => Box::new(Filter {
            input: Some(build(*input, ctx, max_rows)),
            predicate: Arc::new(predicate),
            window: (window > 1).then(|| OrderedWindow::new(window).with_gauge(ctx.stats.clone())),
            ctx: ctx.clone(),
        }),
        PlanNode::Aggregate {
            input,
            group,
            aggs,
            window,
        } => Box::new(Aggregate {
            input: Some(build(*input, ctx, max_rows)),
            group,
            aggs,
            window,
            max_rows,
            ctx: ctx.clone(),
            output: None,
        }),
        PlanNode::Sort { input, keys, window } => {
            let (keys, desc): (Vec<BoundExpr>, Vec<bool>) = keys.into_iter().unzip();
            Box::new(Sort {
                input: Some(build(*input, ctx, max_rows)),
                keys: Arc::new(keys),
                desc,
                window,
                max_rows,
                ctx: ctx.clone(),
                sorted: None,
            })
        }
        PlanNode::Limit { input, limit, offset } => Box::new(Limit {
            input: Some(build(*input, ctx, max_rows)),
            skip: offset,
            remaining: limit,
        }),
    }
}

/// A running query. Rows are produced on demand by [`QueryHandle::next`];
/// dropping the handle cancels outstanding work.
pub struct QueryHandle {
    input: Option<Box<dyn Operator>>,
    output: Arc<Vec<BoundExpr>>,
    window: Option<OrderedWindow<Result<Vec<Value>, SqlError>>>,
    columns: Vec<String>,
    path: ExecPath,
    ctx: ExecCtx,
    done: bool,
}

impl QueryHandle {
    pub(crate) fn start(plan: LogicalPlan, ctx: ExecCtx, max_buffered_rows: usize) -> Self {
        let input = build(plan.root, &ctx, max_buffered_rows);
        Self {
            input: Some(input),
            output: Arc::new(plan.output),
            window: (plan.sink_window > 1).then(|| OrderedWindow::new(plan.sink_window).with_gauge(ctx.stats.clone())),
            columns: plan.columns,
            path: plan.path,
            ctx,
            done: false,
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn path(&self) -> ExecPath {
        self.path
    }

    pub fn stats(&self) -> Arc<ExecStats> {
        self.ctx.stats.clone()
    }

    /// Token that cancels this query; clone it into signal handlers.
    pub fn cancel_token(&self) -> CancellationToken {
        self.ctx.cancel.clone()
    }

    pub fn cancel(&self) {
        self.ctx.cancel.cancel();
    }

    /// The next output row. After cancellation this yields `Cancelled` once,
    /// then `None`.
    pub async fn next(&mut self) -> Option<Result<Vec<Value>, SqlError>> {
        if self.done {
            return None;
        }
        let cancel = self.ctx.cancel.clone();
        let result = tokio::select! {
            biased;
            _ = cancel.cancelled() => Some(Err(SqlError::Cancelled)),
            r = self.pull() => r,
        };
        match &result {
            Some(Ok(_)) => self.ctx.stats.row_emitted(),
            _ => self.finish(),
        }
        result
    }

    async fn pull(&mut self) -> Option<Result<Vec<Value>, SqlError>> {
        let Some(window) = self.window.as_mut() else {
            let row = match self.input.as_mut()?.next().await? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            let mut out = Vec::with_capacity(self.output.len());
            for e in self.output.iter() {
                match eval(e, &row, &self.ctx).await {
                    Ok(v) => out.push(v),
                    Err(e) => return Some(Err(e)),
                }
            }
            return Some(Ok(out));
        };
        let (exprs, ctx) = (self.output.clone(), self.ctx.clone());
        refill(&mut self.input, window, |row| eval_all(exprs.clone(), row.into(), ctx.clone())).await
    }

    fn finish(&mut self) {
        self.done = true;
        self.window = None;
        self.input = None;
    }

    /// Drains the remaining rows.
    pub async fn collect(mut self) -> Result<Vec<Vec<Value>>, SqlError> {
        let mut rows = Vec::new();
        while let Some(row) = self.next().await {
            rows.push(row?);
        }
        Ok(rows)
    }
}

impl Drop for QueryHandle {
    fn drop(&mut self) {
        if !self.done {
            self.ctx.cancel.cancel();
        }
    }
}
