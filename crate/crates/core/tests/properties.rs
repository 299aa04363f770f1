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

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use lakecell::sql::backend::RowTable;
use lakecell::sql::{Arity, CostClass, DeferredCell, Engine, ExecCtx, Params, SqlError, UdfDef};
use lakecell::Value;
use proptest::prelude::*;

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn forcing_k_times_runs_the_thunk_once(k in 2usize..=10, concurrent in any::<bool>()) {
        let rt = runtime();
        let runs = Arc::new(AtomicUsize::new(0));
        let r = runs.clone();
        let cell = DeferredCell::new(CostClass::Inference, move |_| async move {
            r.fetch_add(1, Ordering::SeqCst);
            tokio::time::sleep(Duration::from_micros(200)).await;
            Ok(Value::Int(42))
        });
        let ctx = ExecCtx::new();
        let values = rt.block_on(async {
            if concurrent {
                join_all((0..k).map(|_| cell.force(&ctx))).await
            } else {
                let mut out = Vec::new();
                for _ in 0..k {
                    out.push(cell.force(&ctx).await);
                }
                out
            }
        });
        prop_assert_eq!(runs.load(Ordering::SeqCst), 1);
        prop_assert!(values.into_iter().all(|v| v == Ok(Value::Int(42))));
        prop_assert_eq!(ctx.stats.cells_forced(CostClass::Inference), 1);
    }

    #[test]
    fn cancellation_bounds_udf_calls(m in 0usize..40, cap in 1usize..24, delay_us in 0u64..400) {
        let rt = runtime();
        let rows = (0..400).map(|i| vec![Value::Int(i)]).collect();
        let engine = Engine::new();
        engine.register_table("t", Arc::new(RowTable::new(vec!["id".into()], rows))).unwrap();
        engine
            .register_udf(
                UdfDef::asynchronous("work", Arity::Exact(1), move |args| async move {
                    tokio::time::sleep(Duration::from_micros(delay_us)).await;
                    Ok(args[0].clone())
                })
                .with_concurrency_cap(cap),
            )
            .unwrap();
        let (emitted, calls) = rt.block_on(async {
            let mut h = engine.execute("SELECT work(id) FROM t", &Params::new()).unwrap();
            let mut emitted = 0;
            for _ in 0..m {
                match h.next().await {
                    Some(Ok(_)) => emitted += 1,
                    other => panic!("unexpected {other:?}"),
                }
            }
            h.cancel();
            assert!(matches!(h.next().await, Some(Err(SqlError::Cancelled))));
            assert!(h.next().await.is_none());
            // Let anything still in flight settle before reading the counter.
            tokio::time::sleep(Duration::from_millis(2)).await;
            (emitted, h.stats().total_udf_calls() as usize)
        });
        prop_assert_eq!(emitted, m);
        prop_assert!(calls <= m + cap, "calls {} > m {} + cap {}", calls, m, cap);
    }
}
