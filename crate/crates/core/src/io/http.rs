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

use std::collections::BTreeMap;

use async_trait::async_trait;

use super::{FetchHook, FetchRequest, FetchResponse, IoError, Method};

/// Static headers attached to every request whose URL starts with `prefix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderRule {
    pub prefix: String,
    pub headers: Vec<(String, String)>,
}

impl HeaderRule {
    /// Parses `{"<url prefix>": {"Header": "value", ...}, ...}`.
    pub fn parse_config(json: &str) -> Result<Vec<HeaderRule>, serde_json::Error> {
        let map: BTreeMap<String, BTreeMap<String, String>> = serde_json::from_str(json)?;
        Ok(map
            .into_iter()
            .map(|(prefix, headers)| HeaderRule {
                prefix,
                headers: headers.into_iter().collect(),
            })
            .collect())
    }
}

/// Plain HTTP(S) transport with optional per-prefix static headers.
pub struct HttpFetchHook {
    client: reqwest::Client,
    rules: Vec<HeaderRule>,
}

impl HttpFetchHook {
    pub fn new(rules: Vec<HeaderRule>) -> Self {
        Self {
            client: reqwest::Client::new(),
            rules,
        }
    }
}

#[async_trait]
impl FetchHook for HttpFetchHook {
    async fn fetch(&self, request: FetchRequest) -> Result<FetchResponse, IoError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Head => self.client.head(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        // Longest matching prefix wins.
        if let Some(rule) = self
            .rules
            .iter()
            .filter(|r| request.url.starts_with(&r.prefix))
            .max_by_key(|r| r.prefix.len())
        {
            for (name, value) in &rule.headers {
                builder = builder.header(name, value);
            }
        }
        let response = builder
            .send()
            .await
            .map_err(|e| IoError::transport(&request.url, e))?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_string(), v.to_str().ok()?.to_string())))
            .collect();
        let body = response
            .bytes()
            .await
            .map_err(|e| IoError::transport(&request.url, e))?;
        Ok(FetchResponse { status, headers, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefix_header_config() {
        let rules = HeaderRule::parse_config(
            r#"{"https://bucket.example/": {"Authorization": "Bearer abc"}}"#,
        )
        .unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].headers, vec![("Authorization".into(), "Bearer abc".into())]);
    }
}
