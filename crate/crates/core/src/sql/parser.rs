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

//! Recursive-descent statement parser with Pratt-style expressions.

use super::ast::*;
use super::error::SqlError;
use super::lexer::{syntax_error, tokenize, Tok, Token};
use crate::value::Value;

/// Words that end an expression or select item rather than alias it.
const RESERVED: [&str; 24] = [
    "select", "from", "where", "group", "by", "order", "having", "limit", "offset", "join", "inner", "left",
    "outer", "on", "and", "or", "not", "as", "asc", "desc", "union", "cross", "right", "full",
];

pub fn parse(sql: &str) -> Result<Select, SqlError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { src: sql, tokens, i: 0 };
    let stmt = p.select()?;
    p.eat_sym(";");
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of statement"));
    }
    Ok(stmt)
}

/// Parses a standalone expression.
pub fn parse_expr(sql: &str) -> Result<Expr, SqlError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { src: sql, tokens, i: 0 };
    let e = p.expr(0)?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    i: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.i + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.i].tok.clone();
        if self.i < self.tokens.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> SqlError {
        syntax_error(
            self.src,
            self.pos(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&kw.to_ascii_uppercase()))
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{s}'")))
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, SqlError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_reserved(&w) => {
                self.bump();
                Ok(w)
            }
            Tok::QuotedIdent(s) | Tok::DoubleQuoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("as") {
            return self.identifier("alias").map(Some);
        }
        match self.peek() {
            Tok::Word(w) if !is_reserved(w) => self.identifier("alias").map(Some),
            Tok::QuotedIdent(_) | Tok::DoubleQuoted(_) => self.identifier("alias").map(Some),
            _ => Ok(None),
        }
    }

    fn unsigned(&mut self, what: &str) -> Result<u64, SqlError> {
        match self.peek().clone() {
            Tok::Int(n) if n >= 0 => {
                self.bump();
                Ok(n as u64)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_kw("select")?;
        let mut stmt = Select {
            distinct: self.eat_kw("distinct"),
            ..Select::default()
        };
        if !stmt.distinct {
            self.eat_kw("all");
        }
        loop {
            stmt.items.push(self.select_item()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        if self.eat_kw("from") {
            stmt.from = Some(self.table_ref()?);
            loop {
                let kind = if self.eat_kw("join") {
                    JoinKind::Inner
                } else if self.is_kw("inner") && self.is_kw_at(1, "join") {
                    self.bump();
                    self.bump();
                    JoinKind::Inner
                } else if self.is_kw("left") {
                    self.bump();
                    self.eat_kw("outer");
                    self.expect_kw("join")?;
                    JoinKind::Left
                } else if self.is_kw("right") || self.is_kw("full") || self.is_kw("cross") {
                    return Err(syntax_error(
                        self.src,
                        self.pos(),
                        "only INNER and LEFT joins are supported",
                    ));
                } else if self.eat_sym(",") {
                    return Err(syntax_error(
                        self.src,
                        self.pos(),
                        "comma joins are not supported; use JOIN ... ON",
                    ));
                } else {
                    break;
                };
                let table = self.table_ref()?;
                self.expect_kw("on")?;
                let on = self.expr(0)?;
                stmt.joins.push(Join { kind, table, on });
            }
        }
        if self.eat_kw("where") {
            stmt.selection = Some(self.expr(0)?);
        }
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            stmt.group_by = self.expr_list()?;
        }
        if self.eat_kw("having") {
            stmt.having = Some(self.expr(0)?);
        }
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            loop {
                let expr = self.expr(0)?;
                let desc = if self.eat_kw("desc") {
                    true
                } else {
                    self.eat_kw("asc");
                    false
                };
                stmt.order_by.push(OrderItem { expr, desc });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        if self.eat_kw("limit") {
            stmt.limit = Some(self.unsigned("row count after LIMIT")?);
        }
        if self.eat_kw("offset") {
            stmt.offset = Some(self.unsigned("row count after OFFSET")?);
        }
        Ok(stmt)
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard { qualifier: None });
        }
        let qualified_star = matches!(self.peek(), Tok::Word(_) | Tok::QuotedIdent(_) | Tok::DoubleQuoted(_))
            && matches!(self.peek_at(1), Tok::Sym("."))
            && matches!(self.peek_at(2), Tok::Sym("*"));
        if qualified_star {
            let q = self.identifier("table name")?;
            self.bump();
            self.bump();
            return Ok(SelectItem::Wildcard { qualifier: Some(q) });
        }
        let expr = self.expr(0)?;
        let alias = self.optional_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        let pos = self.pos();
        let name = self.identifier("table name")?;
        let alias = self.optional_alias()?;
        Ok(TableRef { name, alias, pos })
    }

    fn expr_list(&mut self) -> Result<Vec<Expr>, SqlError> {
        let mut out = vec![self.expr(0)?];
        while self.eat_sym(",") {
            out.push(self.expr(0)?);
        }
        Ok(out)
    }

    /// Pratt loop: binding powers OR 1, AND 2, NOT 3, comparisons 4, || 5,
    /// additive 6, multiplicative 7, unary minus 8, `::` 9.
    fn expr(&mut self, min_bp: u8) -> Result<Expr, SqlError> {
        let mut left = self.prefix()?;
        loop {
            let negated = self.is_kw("not")
                && (self.is_kw_at(1, "in") || self.is_kw_at(1, "like") || self.is_kw_at(1, "between"));
            let bp = match self.peek() {
                Tok::Word(w) => match w.to_ascii_lowercase().as_str() {
                    "or" => 1,
                    "and" => 2,
                    "is" | "in" | "like" | "between" => 4,
                    "not" if negated => 4,
                    _ => break,
                },
                Tok::Sym(s) => match *s {
                    "=" | "<>" | "!=" | "<" | "<=" | ">" | ">=" => 4,
                    "||" => 5,
                    "+" | "-" => 6,
                    "*" | "/" | "%" => 7,
                    "::" => 9,
                    _ => break,
                },
                _ => break,
            };
            if bp <= min_bp {
                break;
            }
            if negated {
                self.bump();
            }
            let tok = self.bump();
            left = match tok {
                Tok::Word(w) => match w.to_ascii_lowercase().as_str() {
                    "or" => binary(BinaryOp::Or, left, self.expr(1)?),
                    "and" => binary(BinaryOp::And, left, self.expr(2)?),
                    "is" => {
                        let negated = self.eat_kw("not");
                        self.expect_kw("null")?;
                        Expr::IsNull {
                            expr: Box::new(left),
                            negated,
                        }
                    }
                    "in" => {
                        self.expect_sym("(")?;
                        let list = self.expr_list()?;
                        self.expect_sym(")")?;
                        Expr::InList {
                            expr: Box::new(left),
                            list,
                            negated,
                        }
                    }
                    "like" => Expr::Like {
                        expr: Box::new(left),
                        pattern: Box::new(self.expr(4)?),
                        negated,
                    },
                    "between" => {
                        let low = self.expr(4)?;
                        self.expect_kw("and")?;
                        let high = self.expr(4)?;
                        Expr::Between {
                            expr: Box::new(left),
                            low: Box::new(low),
                            high: Box::new(high),
                            negated,
                        }
                    }
                    _ => unreachable!(),
                },
                Tok::Sym("::") => Expr::Cast {
                    expr: Box::new(left),
                    to: self.cast_type()?,
                },
                Tok::Sym(s) => {
                    let op = match s {
                        "=" => BinaryOp::Eq,
                        "<>" | "!=" => BinaryOp::NotEq,
                        "<" => BinaryOp::Lt,
                        "<=" => BinaryOp::LtEq,
                        ">" => BinaryOp::Gt,
                        ">=" => BinaryOp::GtEq,
                        "||" => BinaryOp::Concat,
                        "+" => BinaryOp::Add,
                        "-" => BinaryOp::Sub,
                        "*" => BinaryOp::Mul,
                        "/" => BinaryOp::Div,
                        _ => BinaryOp::Mod,
                    };
                    binary(op, left, self.expr(bp)?)
                }
                _ => unreachable!(),
            };
        }
        Ok(left)
    }

    fn prefix(&mut self) -> Result<Expr, SqlError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Literal(Value::Int(n)))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Literal(Value::Float(x)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Value::string(s)))
            }
            Tok::Param(p) => {
                self.bump();
                Ok(Expr::Param(p))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr(0)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("-") => {
                self.bump();
                let e = self.expr(8)?;
                Ok(match e {
                    Expr::Literal(Value::Int(n)) => Expr::Literal(Value::Int(-n)),
                    Expr::Literal(Value::Float(x)) => Expr::Literal(Value::Float(-x)),
                    other => Expr::Unary {
                        op: UnaryOp::Neg,
                        expr: Box::new(other),
                    },
                })
            }
            Tok::Sym("+") => {
                self.bump();
                self.expr(8)
            }
            Tok::DoubleQuoted(s) | Tok::QuotedIdent(s) => {
                let double = matches!(self.peek(), Tok::DoubleQuoted(_));
                self.bump();
                if self.eat_sym(".") {
                    let name = self.identifier("column name")?;
                    return Ok(Expr::Column {
                        qualifier: Some(s),
                        name,
                    });
                }
                Ok(if double {
                    Expr::Quoted(s)
                } else {
                    Expr::Column {
                        qualifier: None,
                        name: s,
                    }
                })
            }
            Tok::Word(w) => self.word(w),
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn word(&mut self, w: String) -> Result<Expr, SqlError> {
        let lower = w.to_ascii_lowercase();
        match lower.as_str() {
            "null" => {
                self.bump();
                return Ok(Expr::Literal(Value::Null));
            }
            "true" | "false" => {
                self.bump();
                return Ok(Expr::Literal(Value::Boolean(lower == "true")));
            }
            "not" => {
                self.bump();
                let e = self.expr(3)?;
                return Ok(Expr::Unary {
                    op: UnaryOp::Not,
                    expr: Box::new(e),
                });
            }
            "case" => {
                self.bump();
                return self.case();
            }
            "cast" if matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let e = self.expr(0)?;
                self.expect_kw("as")?;
                let to = self.cast_type()?;
                self.expect_sym(")")?;
                return Ok(Expr::Cast {
                    expr: Box::new(e),
                    to,
                });
            }
            _ => {}
        }
        if is_reserved(&w) {
            return Err(self.unexpected("an expression"));
        }
        self.bump();
        if self.eat_sym("(") {
            return self.call(w);
        }
        if self.eat_sym(".") {
            let name = self.identifier("column name")?;
            return Ok(Expr::Column {
                qualifier: Some(w),
                name,
            });
        }
        Ok(Expr::Column {
            qualifier: None,
            name: w,
        })
    }

    fn call(&mut self, name: String) -> Result<Expr, SqlError> {
        if self.eat_sym("*") {
            self.expect_sym(")")?;
            return Ok(Expr::Function {
                name,
                args: vec![],
                distinct: false,
                star: true,
            });
        }
        let distinct = self.eat_kw("distinct");
        let args = if self.eat_sym(")") {
            vec![]
        } else {
            let args = self.expr_list()?;
            self.expect_sym(")")?;
            args
        };
        Ok(Expr::Function {
            name,
            args,
            distinct,
            star: false,
        })
    }

    fn case(&mut self) -> Result<Expr, SqlError> {
        let operand = if self.is_kw("when") {
            None
        } else {
            Some(Box::new(self.expr(0)?))
        };
        let mut branches = Vec::new();
        while self.eat_kw("when") {
            let w = self.expr(0)?;
            self.expect_kw("then")?;
            branches.push((w, self.expr(0)?));
        }
        if branches.is_empty() {
            return Err(self.unexpected("WHEN"));
        }
        let otherwise = if self.eat_kw("else") {
            Some(Box::new(self.expr(0)?))
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(Expr::Case {
            operand,
            branches,
            otherwise,
        })
    }

    fn cast_type(&mut self) -> Result<CastType, SqlError> {
        let Tok::Word(w) = self.peek().clone() else {
            return Err(self.unexpected("a type name"));
        };
        let ty = match w.to_ascii_lowercase().as_str() {
            "int" | "integer" | "bigint" | "smallint" | "tinyint" | "long" => CastType::Int,
            "float" | "double" | "real" | "decimal" | "numeric" => CastType::Float,
            "text" | "varchar" | "string" | "char" => CastType::Text,
            "bool" | "boolean" => CastType::Boolean,
            _ => return Err(self.unexpected("a type name (BIGINT, DOUBLE, VARCHAR, BOOLEAN)")),
        };
        self.bump();
        // Tolerate VARCHAR(n) and DECIMAL(p, s).
        if self.eat_sym("(") {
            while !self.eat_sym(")") {
                if self.bump() == Tok::Eof {
                    return Err(self.unexpected("')'"));
                }
            }
        }
        Ok(ty)
    }
}

fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn is_reserved(w: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_projection() {
        let s = parse("SELECT 1").unwrap();
        assert_eq!(
            s.items,
            vec![SelectItem::Expr {
                expr: Expr::Literal(Value::Int(1)),
                alias: None
            }]
        );
        assert!(s.from.is_none());
    }

    #[test]
    fn udf_with_parameter_and_limit() {
        let s = parse("SELECT llm('classify', content) FROM traces WHERE session_id = $id LIMIT 5").unwrap();
        assert_eq!(s.limit, Some(5));
        assert_eq!(s.from.unwrap().name, "traces");
        let SelectItem::Expr { expr: Expr::Function { name, args, .. }, .. } = &s.items[0] else {
            panic!()
        };
        assert_eq!(name, "llm");
        assert_eq!(args.len(), 2);
        assert_eq!(
            s.selection,
            Some(binary(
                BinaryOp::Eq,
                Expr::Column {
                    qualifier: None,
                    name: "session_id".into()
                },
                Expr::Param("id".into())
            ))
        );
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a OR b AND NOT c = 1 + 2 * 3").unwrap();
        assert_eq!(e.to_string(), "a OR b AND NOT c = 1 + 2 * 3");
        let Expr::Binary { op: BinaryOp::Or, right, .. } = e else { panic!() };
        let Expr::Binary { op: BinaryOp::And, right, .. } = *right else { panic!() };
        let Expr::Unary { op: UnaryOp::Not, expr } = *right else { panic!() };
        let Expr::Binary { op: BinaryOp::Eq, right, .. } = *expr else { panic!() };
        assert!(matches!(*right, Expr::Binary { op: BinaryOp::Add, .. }));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let s = parse("select DISTINCT a As x from T t left outer join u ON t.k = u.k Order By x desc limit 3 offset 1")
            .unwrap();
        assert!(s.distinct);
        assert_eq!(s.joins[0].kind, JoinKind::Left);
        assert_eq!(s.from.unwrap().alias.as_deref(), Some("t"));
        assert!(s.order_by[0].desc);
        assert_eq!((s.limit, s.offset), (Some(3), Some(1)));
    }

    #[test]
    fn predicates_and_case() {
        let e = parse_expr("x NOT BETWEEN 1 AND 2 AND y NOT IN (1, 2) AND z IS NOT NULL AND w LIKE 'a%'").unwrap();
        assert_eq!(
            e.to_string(),
            "x NOT BETWEEN 1 AND 2 AND y NOT IN (1, 2) AND z IS NOT NULL AND w LIKE 'a%'"
        );
        let c = parse_expr("CASE WHEN a > 1 THEN 'big' ELSE 'small' END").unwrap();
        assert!(matches!(c, Expr::Case { .. }));
        let k = parse_expr("CAST(a AS VARCHAR(10))").unwrap();
        assert_eq!(k.to_string(), "CAST(a AS VARCHAR)");
    }

    #[test]
    fn quoting_variants() {
        let s = parse("SELECT \"my col\", `other`, t.\"x\" FROM \"tbl\"").unwrap();
        assert_eq!(s.from.unwrap().name, "tbl");
        let SelectItem::Expr { expr, .. } = &s.items[0] else { panic!() };
        assert_eq!(expr, &Expr::Quoted("my col".into()));
        let SelectItem::Expr { expr, .. } = &s.items[2] else { panic!() };
        assert!(matches!(expr, Expr::Column { qualifier: Some(q), .. } if q == "t"));
    }

    #[test]
    fn count_star_and_aggregates() {
        let s = parse("SELECT tool, COUNT(*), count(DISTINCT x) FROM t GROUP BY tool").unwrap();
        assert_eq!(s.group_by.len(), 1);
        let SelectItem::Expr { expr, .. } = &s.items[1] else { panic!() };
        assert_eq!(expr.to_string(), "COUNT(*)");
    }

    #[test]
    fn syntax_errors_have_positions() {
        let Err(SqlError::Syntax { position, message, .. }) = parse("SELECT a FROM t WHERE") else {
            panic!()
        };
        assert_eq!(position, 21);
        assert!(message.contains("expression"), "{message}");
        assert!(parse("SELECT a b c").is_err());
        assert!(parse("SELECT FROM t").is_err());
    }
}
