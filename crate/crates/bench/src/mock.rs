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

use std::time::Duration;

use lakecell::sql::{Arity, UdfDef, DEFAULT_UDF_CONCURRENCY};
use lakecell::Value;

#[derive(Debug, Clone, Copy)]
pub struct MockLlmConfig {
    /// Sleep before every answer.
    pub delay: Duration,
    /// Answers are `hash(input) % labels`.
    pub labels: u64,
    pub concurrency: usize,
}

impl Default for MockLlmConfig {
    fn default() -> Self {
        Self {
            delay: Duration::from_millis(5),
            labels: 8,
            concurrency: DEFAULT_UDF_CONCURRENCY,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn label_for(text: &str, labels: u64) -> i64 {
    (fnv1a(text.as_bytes()) % labels) as i64
}

fn text_of(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.to_string(),
        other => other.to_string(),
    }
}

/// `mock_llm(text, ...)`: sleeps `delay`, then returns an integer label that
/// depends only on the arguments.
pub fn mock_llm_udf(config: MockLlmConfig) -> UdfDef {
    named("mock_llm", config)
}

/// The same mock registered as `llm(task_or_prompt, arg, ...)`.
pub fn llm_udf(config: MockLlmConfig) -> UdfDef {
    named("llm", config)
}

fn named(name: &str, config: MockLlmConfig) -> UdfDef {
    UdfDef::asynchronous(name, Arity::AtLeast(1), move |args| async move {
        tokio::time::sleep(config.delay).await;
        let text = match args.as_slice() {
            [one] => text_of(one),
            many => many.iter().map(text_of).collect::<Vec<_>>().join("\u{1f}"),
        };
        Ok(Value::Int(label_for(&text, config.labels)))
    })
    .with_concurrency_cap(config.concurrency)
}
