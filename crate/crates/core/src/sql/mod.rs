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

//! SQL over registered tables with lazily evaluated cells.
//!
//! Every value flowing through a query is a [`DeferredCell`]: column reads and
//! UDF calls only run when an operator or the output actually needs them.

pub mod ast;
pub mod backend;
pub mod cell;
pub mod engine;
pub mod error;
pub mod exec;
pub mod expr;
pub mod lexer;
pub mod parser;
pub mod plan;
pub mod stats;
pub mod udf;

pub use backend::{ColumnDef, TableBackend};
pub use cell::{CellResult, DeferredCell, ErrorMode, ExecCtx};
pub use engine::{Engine, QueryOptions};
pub use error::SqlError;
pub use exec::QueryHandle;
pub use plan::{ExecPath, LogicalPlan, Params};
pub use stats::{CostClass, ExecStats, StatsSnapshot};
pub use udf::{Arity, UdfDef, UdfKind, DEFAULT_UDF_CONCURRENCY};
