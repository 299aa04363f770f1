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

//! Python bindings. Queries run on a shared Tokio runtime with the GIL
//! released; Python UDFs re-acquire it per call.

use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use lakecell::io::{DataSource, FetchLog, HeaderRule, HttpFetchHook, SourceResolver, DEFAULT_TAIL_HINT};
use lakecell::parquet::ParquetFile;
use lakecell::sql::backend::RowTable;
use lakecell::sql::{
    Arity, Engine as CoreEngine, ErrorMode, ExecPath, Params, QueryHandle, QueryOptions, SqlError, UdfDef,
};
use lakecell::Value;
use lakecell_bench::{generate_corpus as write_corpus, llm_udf, mock_llm_udf, MockLlmConfig, TraceCorpusSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyBytes, PyDict, PyList, PyTuple};

create_exception!(lakecell, LakecellError, PyException);
create_exception!(lakecell, TransportError, LakecellError);
create_exception!(lakecell, QueryCancelled, LakecellError);

fn runtime() -> &'static tokio::runtime::Runtime {
    static RT: OnceLock<tokio::runtime::Runtime> = OnceLock::new();
    RT.get_or_init(|| {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .thread_name("lakecell")
            .build()
            .expect("tokio runtime")
    })
}

fn to_py_err(e: SqlError) -> PyErr {
    match e {
        SqlError::Cancelled => QueryCancelled::new_err(e.to_string()),
        e if e.is_transport() => TransportError::new_err(e.to_string()),
        e => LakecellError::new_err(e.to_string()),
    }
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Boolean(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Int(i) => i.into_pyobject(py)?.into_any().unbind(),
        Value::Float(f) => f.into_pyobject(py)?.into_any().unbind(),
        Value::String(s) => s.as_ref().into_pyobject(py)?.into_any().unbind(),
        Value::Binary(b) => PyBytes::new(py, b).into_any().unbind(),
        Value::Timestamp(micros) => {
            let dt = py.import("datetime")?;
            let utc = dt.getattr("timezone")?.getattr("utc")?;
            let epoch = dt.getattr("datetime")?.call1((1970, 1, 1, 0, 0, 0, 0, utc))?;
            let delta = dt.getattr("timedelta")?.call1((0, 0, *micros))?;
            epoch.call_method1("__add__", (delta,))?.unbind()
        }
        Value::Date(days) => {
            let dt = py.import("datetime")?;
            let epoch = dt.getattr("date")?.call1((1970, 1, 1))?;
            let delta = dt.getattr("timedelta")?.call1((*days,))?;
            epoch.call_method1("__add__", (delta,))?.unbind()
        }
        Value::Decimal(d) => py.import("decimal")?.getattr("Decimal")?.call1((d.to_string(),))?.unbind(),
        Value::List(items) => {
            let list = PyList::empty(py);
            for item in items.iter() {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Struct(fields) => {
            let dict = PyDict::new(py);
            for (k, item) in fields.iter() {
                dict.set_item(k.as_ref(), value_to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn value_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if obj.is_none() {
        Ok(Value::Null)
    } else if obj.is_instance_of::<PyBool>() {
        Ok(Value::Boolean(obj.extract()?))
    } else if let Ok(i) = obj.extract::<i64>() {
        Ok(Value::Int(i))
    } else if let Ok(f) = obj.extract::<f64>() {
        Ok(Value::Float(f))
    } else if let Ok(s) = obj.extract::<String>() {
        Ok(Value::string(s))
    } else if let Ok(b) = obj.cast::<PyBytes>() {
        Ok(Value::Binary(b.as_bytes().to_vec().into()))
    } else if let Ok(d) = obj.cast::<PyDict>() {
        let mut fields = Vec::with_capacity(d.len());
        for (k, v) in d.iter() {
            fields.push((k.str()?.to_string().into(), value_from_py(&v)?));
        }
        Ok(Value::Struct(Arc::new(fields)))
    } else if let Ok(items) = obj.extract::<Vec<Bound<'_, PyAny>>>() {
        let values = items.iter().map(value_from_py).collect::<PyResult<Vec<_>>>()?;
        Ok(Value::List(Arc::new(values)))
    } else {
        Err(PyValueError::new_err(format!(
            "cannot convert {} to a SQL value",
            obj.get_type().name()?
        )))
    }
}

fn row_to_py(py: Python<'_>, row: &[Value]) -> PyResult<Py<PyAny>> {
    let items = row.iter().map(|v| value_to_py(py, v)).collect::<PyResult<Vec<_>>>()?;
    Ok(PyTuple::new(py, items)?.into_any().unbind())
}

fn json_loads(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn params_from_py(params: Option<&Bound<'_, PyDict>>) -> PyResult<Params> {
    let mut out = Params::new();
    if let Some(d) = params {
        for (k, v) in d.iter() {
            out.insert(k.extract::<String>()?, value_from_py(&v)?);
        }
    }
    Ok(out)
}

fn error_mode(name: &str) -> PyResult<ErrorMode> {
    match name {
        "fail" => Ok(ErrorMode::Fail),
        "null" => Ok(ErrorMode::Null),
        other => Err(PyValueError::new_err(format!("error_mode must be 'fail' or 'null', not '{other}'"))),
    }
}

fn path_name(path: ExecPath) -> &'static str {
    match path {
        ExecPath::Streaming => "streaming",
        ExecPath::Buffered => "buffered",
    }
}

fn call_python(f: &Py<PyAny>, args: &[Value]) -> Result<Value, String> {
    Python::attach(|py| {
        let py_args = args.iter().map(|v| value_to_py(py, v)).collect::<PyResult<Vec<_>>>()?;
        let out = f.bind(py).call1(PyTuple::new(py, py_args)?)?;
        value_from_py(&out)
    })
    .map_err(|e| e.to_string())
}

/// Materialized query output.
#[pyclass(module = "lakecell", name = "Result", frozen)]
struct QueryResult {
    #[pyo3(get)]
    columns: Vec<String>,
    #[pyo3(get)]
    rows: Py<PyList>,
    #[pyo3(get)]
    stats: Py<PyAny>,
    #[pyo3(get)]
    path: &'static str,
}

#[pymethods]
impl QueryResult {
    fn __len__(&self, py: Python<'_>) -> usize {
        self.rows.bind(py).len()
    }

    /// Rows as dictionaries keyed by column name.
    fn to_dicts(&self, py: Python<'_>) -> PyResult<Vec<Py<PyDict>>> {
        let mut out = Vec::new();
        for row in self.rows.bind(py).iter() {
            let d = PyDict::new(py);
            for (c, v) in self.columns.iter().zip(row.cast::<PyTuple>()?.iter()) {
                d.set_item(c, v)?;
            }
            out.push(d.unbind());
        }
        Ok(out)
    }

    fn __repr__(&self, py: Python<'_>) -> String {
        format!("<Result {} rows x {:?} ({})>", self.rows.bind(py).len(), self.columns, self.path)
    }
}

/// Iterator over rows as they are produced.
#[pyclass(module = "lakecell")]
struct RowStream {
    #[pyo3(get)]
    columns: Vec<String>,
    handle: Arc<Mutex<QueryHandle>>,
}

#[pymethods]
impl RowStream {
    fn __iter__(slf: PyRef<'_, Self>) -> PyRef<'_, Self> {
        slf
    }

    fn __next__(&self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        let handle = self.handle.clone();
        let next = py.detach(move || runtime().block_on(async move { handle.lock().unwrap().next().await }));
        match next {
            None => Ok(None),
            Some(Ok(row)) => row_to_py(py, &row).map(Some),
            Some(Err(e)) => Err(to_py_err(e)),
        }
    }

    fn cancel(&self) {
        self.handle.lock().unwrap().cancel();
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let snapshot = self.handle.lock().unwrap().stats().snapshot();
        json_loads(py, &snapshot.to_json())
    }
}

/// Table and UDF registry plus query entry points.
#[pyclass(module = "lakecell", frozen)]
struct Engine {
    inner: Arc<CoreEngine>,
    resolver: SourceResolver,
    log: Arc<FetchLog>,
}

#[pymethods]
impl Engine {
    /// `fetch_headers` maps URL prefixes to static request headers.
    #[new]
    #[pyo3(signature = (mock_llm_delay_ms=5, concurrency=256, fetch_headers=None))]
    fn new(mock_llm_delay_ms: u64, concurrency: usize, fetch_headers: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        if concurrency == 0 {
            return Err(PyValueError::new_err("concurrency must be positive"));
        }
        let mut rules = Vec::new();
        if let Some(map) = fetch_headers {
            for (prefix, headers) in map.iter() {
                let headers: Vec<(String, String)> = headers.cast::<PyDict>()?.extract::<std::collections::BTreeMap<String, String>>()?.into_iter().collect();
                rules.push(HeaderRule {
                    prefix: prefix.extract()?,
                    headers,
                });
            }
        }
        let log = FetchLog::new();
        let resolver = SourceResolver::new(log.clone()).with_hook(Arc::new(HttpFetchHook::new(rules)));
        let inner = CoreEngine::new();
        let mock = MockLlmConfig {
            delay: Duration::from_millis(mock_llm_delay_ms),
            concurrency,
            ..MockLlmConfig::default()
        };
        inner.register_udf(mock_llm_udf(mock)).map_err(to_py_err)?;
        inner.register_udf(llm_udf(mock)).map_err(to_py_err)?;
        Ok(Self {
            inner: Arc::new(inner),
            resolver,
            log,
        })
    }

    /// Registers a Parquet file, Iceberg metadata.json, JSONL or CSV source.
    fn register(&self, py: Python<'_>, name: &str, uri: &str) -> PyResult<()> {
        let (engine, resolver) = (self.inner.clone(), self.resolver.clone());
        py.detach(|| runtime().block_on(engine.register_uri(name, uri, &resolver)))
            .map_err(to_py_err)
    }

    /// Registers in-memory rows.
    fn register_rows(&self, name: &str, columns: Vec<String>, rows: Vec<Vec<Bound<'_, PyAny>>>) -> PyResult<()> {
        let rows = rows
            .iter()
            .map(|r| {
                if r.len() != columns.len() {
                    return Err(PyValueError::new_err(format!("row has {} values for {} columns", r.len(), columns.len())));
                }
                r.iter().map(value_from_py).collect::<PyResult<Vec<_>>>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        self.inner
            .register_table(name, Arc::new(RowTable::new(columns, rows)))
            .map_err(to_py_err)
    }

    /// Registers a Python callable as a SQL function. With `asynchronous=True`
    /// calls run on worker threads and up to `concurrency` overlap, which
    /// suits functions that wait on the network.
    #[pyo3(signature = (name, func, arity=None, asynchronous=false, concurrency=256))]
    fn register_udf(
        &self,
        name: &str,
        func: Py<PyAny>,
        arity: Option<usize>,
        asynchronous: bool,
        concurrency: usize,
    ) -> PyResult<()> {
        if concurrency == 0 {
            return Err(PyValueError::new_err("concurrency must be positive"));
        }
        let arity = arity.map_or(Arity::Any, Arity::Exact);
        let func = Arc::new(func);
        let udf = if asynchronous {
            UdfDef::asynchronous(name, arity, move |args| {
                let func = func.clone();
                async move {
                    tokio::task::spawn_blocking(move || call_python(&func, &args))
                        .await
                        .map_err(|e| e.to_string())?
                }
            })
            .with_concurrency_cap(concurrency)
        } else {
            UdfDef::sync(name, arity, move |args| call_python(&func, args))
        };
        self.inner.register_udf(udf).map_err(to_py_err)
    }

    fn tables(&self) -> Vec<String> {
        self.inner.table_names()
    }

    fn explain(&self, sql: &str) -> PyResult<String> {
        Ok(self.inner.plan(sql).map_err(to_py_err)?.explain())
    }

    /// Runs `sql` to completion. Ctrl-C cancels the query and raises KeyboardInterrupt.
    #[pyo3(signature = (sql, params=None, error_mode="fail", max_buffered_rows=None))]
    fn query(
        &self,
        py: Python<'_>,
        sql: &str,
        params: Option<&Bound<'_, PyDict>>,
        error_mode: &str,
        max_buffered_rows: Option<usize>,
    ) -> PyResult<QueryResult> {
        let mut options = QueryOptions {
            error_mode: self::error_mode(error_mode)?,
            ..QueryOptions::default()
        };
        if let Some(max) = max_buffered_rows {
            options.max_buffered_rows = max;
        }
        let params = params_from_py(params)?;
        let handle = {
            let _guard = runtime().enter();
            self.inner.execute_with(sql, &params, options).map_err(to_py_err)?
        };
        let (columns, path, stats, token) = (
            handle.columns().to_vec(),
            handle.path(),
            handle.stats(),
            handle.cancel_token(),
        );
        let mut task = runtime().spawn(handle.collect());
        let rows = loop {
            let polled = py.detach(|| {
                runtime().block_on(async { tokio::time::timeout(Duration::from_millis(50), &mut task).await })
            });
            match polled {
                Ok(joined) => break joined.map_err(|e| LakecellError::new_err(e.to_string()))?,
                Err(_) => {
                    if let Err(e) = py.check_signals() {
                        token.cancel();
                        return Err(e);
                    }
                }
            }
        }
        .map_err(to_py_err)?;
        let list = PyList::empty(py);
        for row in &rows {
            list.append(row_to_py(py, row)?)?;
        }
        Ok(QueryResult {
            columns,
            rows: list.unbind(),
            stats: json_loads(py, &stats.snapshot().to_json())?,
            path: path_name(path),
        })
    }

    /// Starts `sql` and returns an iterator that yields rows as they arrive.
    #[pyo3(signature = (sql, params=None))]
    fn stream(&self, sql: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<RowStream> {
        let params = params_from_py(params)?;
        let _guard = runtime().enter();
        let handle = self.inner.execute(sql, &params).map_err(to_py_err)?;
        Ok(RowStream {
            columns: handle.columns().to_vec(),
            handle: Arc::new(Mutex::new(handle)),
        })
    }

    /// Every fetch made so far, as dictionaries.
    fn fetch_log(&self, py: Python<'_>) -> PyResult<Vec<Py<PyAny>>> {
        self.log
            .to_jsonl()
            .lines()
            .map(|l| json_loads(py, l))
            .collect()
    }

    fn clear_fetch_log(&self) {
        self.log.clear();
    }
}

/// Reads a local Parquet file into (column names, row tuples).
#[pyfunction]
#[pyo3(signature = (path, columns=None))]
fn read_parquet(py: Python<'_>, path: &str, columns: Option<Vec<String>>) -> PyResult<(Vec<String>, Vec<Py<PyAny>>)> {
    let path = path.to_string();
    let (names, rows) = py
        .detach(move || {
            runtime().block_on(async move {
                let file = ParquetFile::open(DataSource::local(&path, FetchLog::new()), DEFAULT_TAIL_HINT).await?;
                let picked: Option<Vec<&str>> = columns.as_ref().map(|c| c.iter().map(String::as_str).collect());
                let rows = file.read_rows(picked.as_deref(), None).await?;
                let names = match &columns {
                    Some(c) => c.clone(),
                    None => file.field_names(),
                };
                Ok::<_, lakecell::parquet::ParquetError>((names, rows))
            })
        })
        .map_err(|e| to_py_err(e.into()))?;
    let rows = rows.iter().map(|r| row_to_py(py, r)).collect::<PyResult<Vec<_>>>()?;
    Ok((names, rows))
}

/// Writes the synthetic trace corpus used by the benchmarks. Returns the row count.
#[pyfunction]
#[pyo3(signature = (path, rows=10_000, seed=42, row_group_rows=1000))]
fn generate_corpus(py: Python<'_>, path: &str, rows: usize, seed: u64, row_group_rows: usize) -> PyResult<usize> {
    let spec = TraceCorpusSpec {
        rows,
        seed,
        row_group_rows,
        ..TraceCorpusSpec::default()
    };
    py.detach(|| write_corpus(&spec, std::path::Path::new(path)))
        .map(|r| r.len())
        .map_err(|e| LakecellError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "lakecell")]
fn lakecell_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Engine>()?;
    m.add_class::<QueryResult>()?;
    m.add_class::<RowStream>()?;
    m.add_function(wrap_pyfunction!(read_parquet, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add("LakecellError", py.get_type::<LakecellError>())?;
    m.add("TransportError", py.get_type::<TransportError>())?;
    m.add("QueryCancelled", py.get_type::<QueryCancelled>())?;
    Ok(())
}
