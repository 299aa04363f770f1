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

//! Single-assignment lazy cells.

use std::collections::VecDeque;
use std::fmt;
use std::future::Future;
use std::sync::{Arc, Mutex};

use futures::future::{BoxFuture, Shared};
use futures::{FutureExt, Stream, StreamExt};
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use super::error::SqlError;
use super::stats::{CostClass, ExecStats};
use crate::value::Value;

pub type CellResult = Result<Value, SqlError>;

/// What a failed UDF cell turns into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    #[default]
    Fail,
    /// Degrade to NULL and count a warning.
    Null,
}

/// Per-query execution context handed to every thunk.
#[derive(Clone, Default)]
pub struct ExecCtx {
    pub cancel: CancellationToken,
    pub stats: Arc<ExecStats>,
    pub error_mode: ErrorMode,
}

impl ExecCtx {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.is_cancelled()
    }

    pub fn check(&self) -> Result<(), SqlError> {
        if self.is_cancelled() {
            Err(SqlError::Cancelled)
        } else {
            Ok(())
        }
    }
}

type Thunk = Box<dyn FnOnce(ExecCtx) -> BoxFuture<'static, CellResult> + Send>;

enum State {
    Unevaluated(Thunk),
    InFlight(Shared<BoxFuture<'static, CellResult>>),
    Resolved(Value),
    Failed(SqlError),
}

struct Inner {
    cost: CostClass,
    state: Mutex<State>,
}

/// A lazily computed value. Clones share state, so the thunk runs at most once
/// no matter how many holders force it.
#[derive(Clone)]
pub struct DeferredCell(Arc<Inner>);

impl fmt::Debug for DeferredCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let state = match &*self.0.state.lock().unwrap() {
            State::Unevaluated(_) => "unevaluated".to_string(),
            State::InFlight(_) => "in_flight".to_string(),
            State::Resolved(v) => format!("resolved({v})"),
            State::Failed(e) => format!("failed({e})"),
        };
        write!(f, "DeferredCell({:?}, {state})", self.0.cost)
    }
}

impl DeferredCell {
    pub fn new<F, Fut>(cost: CostClass, thunk: F) -> Self
    where
        F: FnOnce(ExecCtx) -> Fut + Send + 'static,
        Fut: Future<Output = CellResult> + Send + 'static,
    {
        let thunk: Thunk = Box::new(move |ctx| thunk(ctx).boxed());
        Self(Arc::new(Inner {
            cost,
            state: Mutex::new(State::Unevaluated(thunk)),
        }))
    }

    /// An already resolved cell; forcing it never counts as work.
    pub fn resolved(value: Value) -> Self {
        Self(Arc::new(Inner {
            cost: CostClass::Cheap,
            state: Mutex::new(State::Resolved(value)),
        }))
    }

    pub fn null() -> Self {
        Self::resolved(Value::Null)
    }

    pub fn cost_class(&self) -> CostClass {
        self.0.cost
    }

    pub fn is_unevaluated(&self) -> bool {
        matches!(*self.0.state.lock().unwrap(), State::Unevaluated(_))
    }

    /// The settled result, if any.
    pub fn peek(&self) -> Option<CellResult> {
        match &*self.0.state.lock().unwrap() {
            State::Resolved(v) => Some(Ok(v.clone())),
            State::Failed(e) => Some(Err(e.clone())),
            _ => None,
        }
    }

    /// Demands the value. The first force starts the thunk (unless the query is
    /// cancelled); later forces wait on the same computation or read the result.
    pub fn force(&self, ctx: &ExecCtx) -> BoxFuture<'static, CellResult> {
        let mut state = self.0.state.lock().unwrap();
        match &*state {
            State::Resolved(v) => return futures::future::ready(Ok(v.clone())).boxed(),
            State::Failed(e) => return futures::future::ready(Err(e.clone())).boxed(),
            State::InFlight(shared) => return shared.clone().boxed(),
            State::Unevaluated(_) => {}
        }
        if ctx.is_cancelled() {
            return futures::future::ready(Err(SqlError::Cancelled)).boxed();
        }
        let State::Unevaluated(thunk) = std::mem::replace(&mut *state, State::Resolved(Value::Null)) else {
            unreachable!()
        };
        ctx.stats.cell_forced(self.0.cost);
        let weak = Arc::downgrade(&self.0);
        let work = thunk(ctx.clone());
        let shared = async move {
            let result = work.await;
            if let Some(inner) = weak.upgrade() {
                *inner.state.lock().unwrap() = match &result {
                    Ok(v) => State::Resolved(v.clone()),
                    Err(e) => State::Failed(e.clone()),
                };
            }
            result
        }
        .boxed()
        .shared();
        *state = State::InFlight(shared.clone());
        shared.boxed()
    }
}

/// Runs futures on the runtime with at most `window` outstanding and hands
/// results back in submission order. Outstanding work is aborted on drop.
pub(crate) struct OrderedWindow<T: Send + 'static> {
    window: usize,
    pending: VecDeque<JoinHandle<T>>,
    /// Rows held here count toward the buffered-rows gauge.
    gauge: Option<Arc<ExecStats>>,
}

impl<T: Send + 'static> OrderedWindow<T> {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            pending: VecDeque::new(),
            gauge: None,
        }
    }

    pub fn with_gauge(mut self, stats: Arc<ExecStats>) -> Self {
        self.gauge = Some(stats);
        self
    }

    pub fn is_full(&self) -> bool {
        self.pending.len() >= self.window
    }

    pub fn push<F>(&mut self, fut: F)
    where
        F: Future<Output = T> + Send + 'static,
    {
        self.pending.push_back(tokio::spawn(fut));
        if let Some(g) = &self.gauge {
            g.buffer_add(1);
        }
    }

    pub async fn pop(&mut self) -> Option<T> {
        let handle = self.pending.pop_front()?;
        if let Some(g) = &self.gauge {
            g.buffer_sub(1);
        }
        match handle.await {
            Ok(v) => Some(v),
            Err(e) if e.is_panic() => std::panic::resume_unwind(e.into_panic()),
            Err(_) => None,
        }
    }
}

impl<T: Send + 'static> Drop for OrderedWindow<T> {
    fn drop(&mut self) {
        for h in &self.pending {
            h.abort();
        }
        if let Some(g) = &self.gauge {
            g.buffer_sub(self.pending.len() as u64);
        }
    }
}

/// Forces `cells` with up to `cap` outstanding and yields `(index, result)` as
/// each settles, which may differ from submission order.
pub fn evaluate_async_udf_window(
    cells: Vec<DeferredCell>,
    cap: usize,
    ctx: ExecCtx,
) -> impl Stream<Item = (usize, CellResult)> {
    futures::stream::iter(cells.into_iter().enumerate())
        .map(move |(i, cell)| {
            let fut = cell.force(&ctx);
            async move { (i, fut.await) }
        })
        .buffer_unordered(cap.max(1))
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    fn counting_cell(counter: Arc<AtomicUsize>) -> DeferredCell {
        DeferredCell::new(CostClass::Io, move |_| async move {
            counter.fetch_add(1, Ordering::SeqCst);
            tokio::time::sleep(std::time::Duration::from_millis(2)).await;
            Ok(Value::Int(7))
        })
    }

    #[tokio::test]
    async fn concurrent_forces_share_one_execution() {
        let counter = Arc::new(AtomicUsize::new(0));
        let cell = counting_cell(counter.clone());
        let ctx = ExecCtx::new();
        let forces: Vec<_> = (0..5).map(|_| cell.force(&ctx)).collect();
        for r in futures::future::join_all(forces).await {
            assert_eq!(r.unwrap(), Value::Int(7));
        }
        assert_eq!(cell.force(&ctx).await.unwrap(), Value::Int(7));
        assert_eq!(counter.load(Ordering::SeqCst), 1);
        assert_eq!(ctx.stats.cells_forced(CostClass::Io), 1);
    }

    #[tokio::test]
    async fn cancelled_context_does_not_start_thunks() {
        let counter = Arc::new(AtomicUsize::new(0));
        let cell = counting_cell(counter.clone());
        let ctx = ExecCtx::new();
        ctx.cancel.cancel();
        assert_eq!(cell.force(&ctx).await, Err(SqlError::Cancelled));
        assert_eq!(counter.load(Ordering::SeqCst), 0);
        assert!(cell.is_unevaluated());
    }

    #[tokio::test]
    async fn failures_are_memoized() {
        let counter = Arc::new(AtomicUsize::new(0));
        let c = counter.clone();
        let cell = DeferredCell::new(CostClass::Cheap, move |_| async move {
            c.fetch_add(1, Ordering::SeqCst);
            Err(SqlError::Eval("boom".into()))
        });
        let ctx = ExecCtx::new();
        assert!(cell.force(&ctx).await.is_err());
        assert!(cell.force(&ctx).await.is_err());
        assert_eq!(counter.load(Ordering::SeqCst), 1);
        assert!(matches!(cell.peek(), Some(Err(SqlError::Eval(_)))));
    }

    #[tokio::test]
    async fn resolved_cells_count_no_work() {
        let ctx = ExecCtx::new();
        let cell = DeferredCell::resolved(Value::Boolean(true));
        assert_eq!(cell.force(&ctx).await.unwrap(), Value::Boolean(true));
        assert_eq!(ctx.stats.snapshot().cells_forced.cheap, 0);
    }

    #[tokio::test]
    async fn ordered_window_preserves_submission_order() {
        let mut w = OrderedWindow::new(4);
        for i in 0..4u64 {
            w.push(async move {
                tokio::time::sleep(std::time::Duration::from_millis(10 - 2 * i)).await;
                i
            });
        }
        assert!(w.is_full());
        let mut out = Vec::new();
        while let Some(v) = w.pop().await {
            out.push(v);
        }
        assert_eq!(out, vec![0, 1, 2, 3]);
    }
}
