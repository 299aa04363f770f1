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

use super::error::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Bare word; keywords are recognized by the parser, case-insensitively.
    Word(String),
    /// Backtick-quoted identifier.
    QuotedIdent(String),
    /// Double-quoted text: an identifier if it names a column, else a string.
    DoubleQuoted(String),
    Str(String),
    Int(i64),
    Float(f64),
    Param(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::QuotedIdent(s) => format!("`{s}`"),
            Tok::DoubleQuoted(s) => format!("\"{s}\""),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Float(f) => format!("number {f}"),
            Tok::Param(p) => format!("parameter ${p}"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

/// 1-based line and column for a byte offset.
pub fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

pub fn syntax_error(src: &str, pos: usize, message: impl Into<String>) -> SqlError {
    let (line, column) = line_col(src, pos);
    SqlError::Syntax {
        message: message.into(),
        position: pos,
        line,
        column,
        suggestion: None,
    }
}

const SYMBOLS: [&str; 19] = [
    "<>", "!=", "<=", ">=", "||", "(", ")", ",", ".", "*", "+", "-", "/", "%", "=", "<", ">", ";", "::",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") {
            i = src[i..].find('\n').map_or(bytes.len(), |n| i + n);
            continue;
        }
        if src[i..].starts_with("/*") {
            match src[i + 2..].find("*/") {
                Some(n) => i += n + 4,
                None => return Err(syntax_error(src, i, "unterminated comment")),
            }
            continue;
        }
        let start = i;
        let tok = match c {
            b'\'' | b'"' | b'`' => {
                let (text, end) = quoted(src, i, c)?;
                i = end;
                match c {
                    b'\'' => Tok::Str(text),
                    b'"' => Tok::DoubleQuoted(text),
                    _ => Tok::QuotedIdent(text),
                }
            }
            b'0'..=b'9' => {
                let (tok, end) = number(src, i)?;
                i = end;
                tok
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let (tok, end) = number(src, i)?;
                i = end;
                tok
            }
            b'$' => {
                let end = word_end(bytes, i + 1);
                if end == i + 1 {
                    return Err(syntax_error(src, i, "expected parameter name after '$'"));
                }
                i = end;
                Tok::Param(src[start + 1..end].to_string())
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 => {
                i = word_end(bytes, i);
                Tok::Word(src[start..i].to_string())
            }
            _ => match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
                Some(s) => {
                    i += s.len();
                    Tok::Sym(s)
                }
                None => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(syntax_error(src, i, format!("unexpected character '{ch}'")));
                }
            },
        };
        out.push(Token { tok, pos: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
    });
    Ok(out)
}

fn word_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] >= 0x80) {
        i += 1;
    }
    i
}

/// Quoted run starting at `start`; a doubled quote character escapes itself.
fn quoted(src: &str, start: usize, q: u8) -> Result<(String, usize), SqlError> {
    let bytes = src.as_bytes();
    let mut text = String::new();
    let mut i = start + 1;
    let mut run = i;
    while i < bytes.len() {
        if bytes[i] == q {
            text.push_str(&src[run..i]);
            if bytes.get(i + 1) == Some(&q) {
                text.push(q as char);
                i += 2;
                run = i;
                continue;
            }
            return Ok((text, i + 1));
        }
        i += 1;
    }
    Err(syntax_error(src, start, "unterminated quoted text"))
}

fn number(src: &str, start: usize) -> Result<(Tok, usize), SqlError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let mut float = false;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        float = true;
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            float = true;
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    let text = &src[start..i];
    let tok = if float {
        Tok::Float(text.parse().map_err(|_| syntax_error(src, start, "bad number"))?)
    } else {
        match text.parse() {
            Ok(v) => Tok::Int(v),
            Err(_) => Tok::Float(text.parse().map_err(|_| syntax_error(src, start, "bad number"))?),
        }
    };
    Ok((tok, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_quotes_params_and_symbols() {
        assert_eq!(
            toks("a<>'it''s' \"Col\" `x` $id 1.5 2 >="),
            vec![
                Tok::Word("a".into()),
                Tok::Sym("<>"),
                Tok::Str("it's".into()),
                Tok::DoubleQuoted("Col".into()),
                Tok::QuotedIdent("x".into()),
                Tok::Param("id".into()),
                Tok::Float(1.5),
                Tok::Int(2),
                Tok::Sym(">="),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn skips_comments() {
        assert_eq!(toks("1 -- x\n/* y */ 2"), vec![Tok::Int(1), Tok::Int(2), Tok::Eof]);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let Err(SqlError::Syntax { line, column, .. }) = tokenize("select\n  'abc") else {
            panic!()
        };
        assert_eq!((line, column), (2, 3));
    }
}
