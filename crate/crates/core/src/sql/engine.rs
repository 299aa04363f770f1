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

use std::sync::{Arc, RwLock};

use super::backend::{open_backend, TableBackend};
use super::cell::{ErrorMode, ExecCtx};
use super::error::SqlError;
use super::exec::{QueryHandle, DEFAULT_MAX_BUFFERED_ROWS};
use super::parser::parse;
use super::plan::{plan_select, Catalog, LogicalPlan, Params};
use super::udf::UdfDef;
use crate::io::SourceResolver;
use crate::value::Value;

#[derive(Debug, Clone, Copy)]
pub struct QueryOptions {
    pub error_mode: ErrorMode,
    /// Ceiling on rows held by a sort, aggregate or join build side.
    pub max_buffered_rows: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            error_mode: ErrorMode::Fail,
            max_buffered_rows: DEFAULT_MAX_BUFFERED_ROWS,
        }
    }
}

/// Table and function registry plus the entry point for running SQL.
#[derive(Default)]
pub struct Engine {
    catalog: RwLock<Catalog>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_table(&self, name: &str, backend: Arc<dyn TableBackend>) -> Result<(), SqlError> {
        let mut cat = self.catalog.write().unwrap();
        let key = name.to_ascii_lowercase();
        if cat.tables.contains_key(&key) {
            return Err(SqlError::DuplicateName(name.to_string()));
        }
        cat.tables.insert(key, (name.to_string(), backend));
        Ok(())
    }

    /// Opens `uri` (format chosen by suffix) and registers it as `name`.
    pub async fn register_uri(&self, name: &str, uri: &str, resolver: &SourceResolver) -> Result<(), SqlError> {
        if self.catalog.read().unwrap().tables.contains_key(&name.to_ascii_lowercase()) {
            return Err(SqlError::DuplicateName(name.to_string()));
        }
        let backend = open_backend(uri, resolver).await?;
        self.register_table(name, backend)
    }

    pub fn register_udf(&self, udf: UdfDef) -> Result<(), SqlError> {
        let mut cat = self.catalog.write().unwrap();
        let key = udf.name.to_ascii_lowercase();
        if cat.udfs.contains_key(&key) || cat.function_names().iter().any(|n| n.eq_ignore_ascii_case(&key)) {
            return Err(SqlError::DuplicateName(udf.name.clone()));
        }
        cat.udfs.insert(key, udf);
        Ok(())
    }

    pub fn table_names(&self) -> Vec<String> {
        self.catalog.read().unwrap().tables.values().map(|(n, _)| n.clone()).collect()
    }

    pub fn table(&self, name: &str) -> Option<Arc<dyn TableBackend>> {
        let cat = self.catalog.read().unwrap();
        cat.tables.get(&name.to_ascii_lowercase()).map(|(_, b)| b.clone())
    }

    /// Binds and plans without running; parameters bind as NULL.
    pub fn plan(&self, sql: &str) -> Result<LogicalPlan, SqlError> {
        let stmt = parse(sql)?;
        plan_select(&stmt, &self.catalog.read().unwrap(), None)
    }

    pub fn execute(&self, sql: &str, params: &Params) -> Result<QueryHandle, SqlError> {
        self.execute_with(sql, params, QueryOptions::default())
    }

    /// Plans `sql` and returns a handle; no rows are produced until it is polled.
    /// Must be called inside a Tokio runtime.
    pub fn execute_with(&self, sql: &str, params: &Params, options: QueryOptions) -> Result<QueryHandle, SqlError> {
        let stmt = parse(sql)?;
        let plan = plan_select(&stmt, &self.catalog.read().unwrap(), Some(params))?;
        let ctx = ExecCtx {
            error_mode: options.error_mode,
            ..ExecCtx::new()
        };
        Ok(QueryHandle::start(plan, ctx, options.max_buffered_rows))
    }

    /// Runs `sql` to completion.
    pub async fn query(&self, sql: &str) -> Result<Vec<Vec<Value>>, SqlError> {
        self.execute(sql, &Params::new())?.collect().await
    }
}
