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

use std::fmt;
use std::future::Future;
use std::sync::Arc;

use futures::future::BoxFuture;
use futures::FutureExt;
use tokio::sync::Semaphore;

use super::cell::{CellResult, ErrorMode, ExecCtx};
use super::error::SqlError;
use super::stats::CostClass;
use crate::value::Value;

/// Default number of overlapping invocations for an async UDF.
pub const DEFAULT_UDF_CONCURRENCY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UdfKind {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
    Any,
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
            Arity::Any => true,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
            Arity::Any => write!(f, "any number of"),
        }
    }
}

pub type SyncUdfFn = Arc<dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync>;
pub type AsyncUdfFn = Arc<dyn Fn(Vec<Value>) -> BoxFuture<'static, Result<Value, String>> + Send + Sync>;

#[derive(Clone)]
enum Implementation {
    Sync(SyncUdfFn),
    Async(AsyncUdfFn),
}

/// A user-defined scalar function. Clones share one concurrency limit.
#[derive(Clone)]
pub struct UdfDef {
    pub name: String,
    pub arity: Arity,
    concurrency_cap: usize,
    implementation: Implementation,
    permits: Arc<Semaphore>,
}

impl fmt::Debug for UdfDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UdfDef")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("kind", &self.kind())
            .field("concurrency_cap", &self.concurrency_cap)
            .finish()
    }
}

impl UdfDef {
    pub fn sync<F>(name: impl Into<String>, arity: Arity, f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        Self::build(name, arity, Implementation::Sync(Arc::new(f)))
    }

    pub fn asynchronous<F, Fut>(name: impl Into<String>, arity: Arity, f: F) -> Self
    where
        F: Fn(Vec<Value>) -> Fut + Send + Sync + 'static,
        Fut: Future<Output = Result<Value, String>> + Send + 'static,
    {
        Self::build(name, arity, Implementation::Async(Arc::new(move |args| f(args).boxed())))
    }

    fn build(name: impl Into<String>, arity: Arity, implementation: Implementation) -> Self {
        Self {
            name: name.into(),
            arity,
            concurrency_cap: DEFAULT_UDF_CONCURRENCY,
            implementation,
            permits: Arc::new(Semaphore::new(DEFAULT_UDF_CONCURRENCY)),
        }
    }

    /// Panics when `cap` is zero.
    pub fn with_concurrency_cap(mut self, cap: usize) -> Self {
        assert!(cap >= 1, "concurrency cap must be at least 1");
        self.concurrency_cap = cap;
        self.permits = Arc::new(Semaphore::new(cap));
        self
    }

    /// Same function under another name, sharing the concurrency limit.
    pub fn alias(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn kind(&self) -> UdfKind {
        match self.implementation {
            Implementation::Sync(_) => UdfKind::Sync,
            Implementation::Async(_) => UdfKind::Async,
        }
    }

    pub fn concurrency_cap(&self) -> usize {
        self.concurrency_cap
    }

    pub(crate) fn cost_class(&self) -> CostClass {
        match self.kind() {
            UdfKind::Sync => CostClass::Cheap,
            UdfKind::Async => CostClass::Inference,
        }
    }

    /// Waits for a slot, then runs the function unless the query was cancelled
    /// in the meantime. Counts the call only when it actually starts.
    pub(crate) async fn invoke(&self, args: Vec<Value>, ctx: &ExecCtx) -> CellResult {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| SqlError::Eval("udf semaphore closed".into()))?;
        ctx.check()?;
        ctx.stats.udf_started(&self.name);
        let result = match &self.implementation {
            Implementation::Sync(f) => f(&args),
            Implementation::Async(f) => f(args).await,
        };
        ctx.stats.udf_finished(&self.name);
        match result {
            Ok(v) => Ok(v),
            Err(_) if ctx.error_mode == ErrorMode::Null => {
                ctx.stats.warn();
                Ok(Value::Null)
            }
            Err(message) => Err(SqlError::Udf {
                name: self.name.clone(),
                message,
            }),
        }
    }
}
