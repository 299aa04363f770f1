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

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lakecell_cli::{exit_code, interrupt_channel, CliConfig, Session, EXIT_OK};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::sync::watch;

const HELP: &str = "\
Statements end with ';'. Meta-commands:
  .tables   list registered tables
  .stats    stats of the last query as JSON
  .help     this text
  .quit     leave the shell
Ctrl-C cancels the running query.";

#[tokio::main]
async fn main() -> ExitCode {
    let config = CliConfig::parse();
    let sql = config.sql.clone();
    let mut interrupts = interrupt_channel();
    let mut session = match Session::open(config).await {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let code = match sql {
        Some(sql) => run_once(&mut session, &sql, &mut interrupts).await,
        None => repl(&mut session, &mut interrupts).await,
    };
    ExitCode::from(code as u8)
}

async fn run_once(session: &mut Session, sql: &str, interrupts: &mut watch::Receiver<u64>) -> i32 {
    let mut out = std::io::stdout();
    match session.run(sql, &mut out, interrupts).await {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn prompt(continuation: bool) {
    eprint!("{}", if continuation { "     ...> " } else { "lakecell> " });
    let _ = std::io::stderr().flush();
}

async fn repl(session: &mut Session, interrupts: &mut watch::Receiver<u64>) -> i32 {
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    let mut buffer = String::new();
    let mut out = std::io::stdout();
    loop {
        prompt(!buffer.is_empty());
        interrupts.borrow_and_update();
        let line = tokio::select! {
            line = lines.next_line() => line,
            _ = interrupts.changed() => {
                // Ctrl-C at the prompt discards the partial statement.
                eprintln!("^C");
                buffer.clear();
                continue;
            }
        };
        let line = match line {
            Ok(Some(l)) => l,
            Ok(None) => break,
            Err(e) => {
                eprintln!("error: reading input: {e}");
                break;
            }
        };
        let trimmed = line.trim();
        if buffer.is_empty() && trimmed.starts_with('.') {
            match trimmed {
                ".quit" | ".exit" => break,
                ".tables" => {
                    for name in session.engine.table_names() {
                        let _ = writeln!(out, "{name}");
                    }
                }
                ".stats" => match &session.last_stats {
                    Some(s) => {
                        let _ = writeln!(out, "{}", s.to_json());
                    }
                    None => eprintln!("no query has run yet"),
                },
                ".help" => eprintln!("{HELP}"),
                other => eprintln!("unknown command {other}; try .help"),
            }
            let _ = out.flush();
            continue;
        }
        if trimmed.is_empty() && buffer.is_empty() {
            continue;
        }
        buffer.push_str(&line);
        buffer.push('\n');
        let statement = buffer.trim_end();
        if let Some(sql) = statement.strip_suffix(';') {
            let sql = sql.to_string();
            buffer.clear();
            if let Err(e) = session.run(&sql, &mut out, interrupts).await {
                eprintln!("error: {e}");
            }
        }
    }
    EXIT_OK
}
