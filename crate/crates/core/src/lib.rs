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

//! A client-side lakehouse read stack: range-efficient Parquet reads, a
//! read-only Iceberg v2 client, and an async SQL engine whose unit of laziness
//! is a per-cell deferred computation.

pub mod iceberg;
pub mod io;
pub mod parquet;
pub mod sql;
pub mod value;

pub use value::{Decimal, KeyValue, Value};
