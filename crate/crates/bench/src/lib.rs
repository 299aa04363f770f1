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

//! Benchmark support: a deterministic agent-trace corpus, a mock `llm()` UDF
//! and a runner for the four canonical query shapes.

pub mod corpus;
pub mod mock;
pub mod shapes;

pub use corpus::{generate_corpus, TraceCorpusSpec, TraceRow};
pub use mock::{label_for, llm_udf, mock_llm_udf, MockLlmConfig};
pub use shapes::{bench_engine, report_jsonl, report_table, run_shape, Shape, ShapeResult};
