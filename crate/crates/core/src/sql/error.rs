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

use crate::iceberg::IcebergError;
use crate::io::IoError;
use crate::parquet::ParquetError;

/// Errors from parsing, binding or executing a query.
///
/// Cloneable because a failed cell hands the same error to every forcer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SqlError {
    #[error("syntax error at line {line}, column {column}: {message}{}", hint(suggestion))]
    Syntax {
        message: String,
        position: usize,
        line: usize,
        column: usize,
        suggestion: Option<String>,
    },
    #[error("{message}{}", hint(suggestion))]
    Bind {
        message: String,
        suggestion: Option<String>,
    },
    #[error("unknown table '{name}'{}; registered tables: {}", hint(suggestion), list(available))]
    UnknownTable {
        name: String,
        available: Vec<String>,
        suggestion: Option<String>,
    },
    #[error("unknown function '{name}'{}", hint(suggestion))]
    UnknownFunction { name: String, suggestion: Option<String> },
    #[error("name '{0}' is already registered")]
    DuplicateName(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("udf {name} failed: {message}")]
    Udf { name: String, message: String },
    #[error("resource exceeded: {0}")]
    ResourceExceeded(String),
    #[error("query cancelled")]
    Cancelled,
    /// Network or filesystem failure reaching a source.
    #[error("{0}")]
    Transport(String),
    /// A source was reachable but its contents could not be decoded.
    #[error("{0}")]
    Storage(String),
}

fn hint(suggestion: &Option<String>) -> String {
    match suggestion {
        Some(s) => format!(" (did you mean '{s}'?)"),
        None => String::new(),
    }
}

fn list(names: &[String]) -> String {
    if names.is_empty() {
        "(none)".to_string()
    } else {
        names.join(", ")
    }
}

impl SqlError {
    pub fn bind(message: impl Into<String>) -> Self {
        SqlError::Bind {
            message: message.into(),
            suggestion: None,
        }
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, SqlError::Transport(_))
    }
}

impl From<IoError> for SqlError {
    fn from(e: IoError) -> Self {
        SqlError::Transport(e.to_string())
    }
}

impl From<ParquetError> for SqlError {
    fn from(e: ParquetError) -> Self {
        match e {
            ParquetError::Io(io) => io.into(),
            other => SqlError::Storage(other.to_string()),
        }
    }
}

impl From<IcebergError> for SqlError {
    fn from(e: IcebergError) -> Self {
        match e {
            IcebergError::Io(io) => io.into(),
            IcebergError::Parquet(p) => p.into(),
            other => SqlError::Storage(other.to_string()),
        }
    }
}

/// Closest candidate within edit distance 2, compared case-insensitively.
pub fn suggest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let needle = name.to_ascii_lowercase();
    candidates
        .into_iter()
        .map(|c| (strsim::osa_distance(&needle, &c.to_ascii_lowercase()), c))
        .filter(|(d, _)| *d <= 2)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.to_string())
}
