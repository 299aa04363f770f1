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

//! Bound expressions and their evaluation over rows of deferred cells.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use futures::future::BoxFuture;
use futures::FutureExt;

use super::ast::{BinaryOp, CastType, UnaryOp};
use super::cell::{DeferredCell, ExecCtx};
use super::error::SqlError;
use crate::value::{sql_cmp, Value};

/// Builtin scalar functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scalar {
    Length,
    Lower,
    Upper,
    Trim,
    Ltrim,
    Rtrim,
    Substr,
    Replace,
    Concat,
    Abs,
    Round,
    Floor,
    Ceil,
    Coalesce,
    Nullif,
    StartsWith,
    Contains,
}

const SCALARS: [(&str, Scalar); 18] = [
    ("length", Scalar::Length),
    ("lower", Scalar::Lower),
    ("upper", Scalar::Upper),
    ("trim", Scalar::Trim),
    ("ltrim", Scalar::Ltrim),
    ("rtrim", Scalar::Rtrim),
    ("substr", Scalar::Substr),
    ("substring", Scalar::Substr),
    ("replace", Scalar::Replace),
    ("concat", Scalar::Concat),
    ("abs", Scalar::Abs),
    ("round", Scalar::Round),
    ("floor", Scalar::Floor),
    ("ceil", Scalar::Ceil),
    ("coalesce", Scalar::Coalesce),
    ("nullif", Scalar::Nullif),
    ("starts_with", Scalar::StartsWith),
    ("contains", Scalar::Contains),
];

impl Scalar {
    pub fn lookup(name: &str) -> Option<Scalar> {
        SCALARS
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, s)| *s)
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        SCALARS.iter().map(|(n, _)| *n)
    }

    pub fn name(self) -> &'static str {
        SCALARS.iter().find(|(_, s)| *s == self).map(|(n, _)| *n).unwrap_or("?")
    }

    /// Accepted argument counts, inclusive.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Scalar::Substr => (2, 3),
            Scalar::Replace => (3, 3),
            Scalar::Round => (1, 2),
            Scalar::Concat | Scalar::Coalesce => (1, usize::MAX),
            Scalar::Nullif | Scalar::StartsWith | Scalar::Contains => (2, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn lookup(name: &str) -> Option<AggFunc> {
        Some(match name.to_ascii_lowercase().as_str() {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "avg" => AggFunc::Avg,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            _ => return None,
        })
    }

    pub fn names() -> [&'static str; 5] {
        ["count", "sum", "avg", "min", "max"]
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundExpr {
    /// Position in the current row.
    Slot(usize),
    Literal(Value),
    Unary {
        op: UnaryOp,
        expr: Box<BoundExpr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<BoundExpr>,
        right: Box<BoundExpr>,
    },
    Scalar {
        func: Scalar,
        args: Vec<BoundExpr>,
    },
    IsNull {
        expr: Box<BoundExpr>,
        negated: bool,
    },
    InList {
        expr: Box<BoundExpr>,
        list: Vec<BoundExpr>,
        negated: bool,
    },
    Between {
        expr: Box<BoundExpr>,
        low: Box<BoundExpr>,
        high: Box<BoundExpr>,
        negated: bool,
    },
    Like {
        expr: Box<BoundExpr>,
        pattern: Box<BoundExpr>,
        negated: bool,
    },
    Case {
        operand: Option<Box<BoundExpr>>,
        branches: Vec<(BoundExpr, BoundExpr)>,
        otherwise: Option<Box<BoundExpr>>,
    },
    Cast {
        expr: Box<BoundExpr>,
        to: CastType,
    },
    /// UDF call; the planner replaces these with slots of lazily computed cells.
    Udf {
        name: String,
        args: Vec<BoundExpr>,
    },
    /// Aggregate call; the planner replaces these with slots of aggregate output.
    Agg {
        func: AggFunc,
        arg: Option<Box<BoundExpr>>,
        distinct: bool,
    },
}

impl BoundExpr {
    /// Direct children, in evaluation order.
    pub fn children(&self) -> Vec<&BoundExpr> {
        match self {
            BoundExpr::Slot(_) | BoundExpr::Literal(_) => vec![],
            BoundExpr::Unary { expr, .. } | BoundExpr::IsNull { expr, .. } | BoundExpr::Cast { expr, .. } => {
                vec![expr]
            }
            BoundExpr::Binary { left, right, .. } => vec![left, right],
            BoundExpr::Scalar { args, .. } | BoundExpr::Udf { args, .. } => args.iter().collect(),
            BoundExpr::InList { expr, list, .. } => std::iter::once(&**expr).chain(list.iter()).collect(),
            BoundExpr::Between { expr, low, high, .. } => vec![expr, low, high],
            BoundExpr::Like { expr, pattern, .. } => vec![expr, pattern],
            BoundExpr::Case {
                operand,
                branches,
                otherwise,
            } => operand
                .iter()
                .map(|b| &**b)
                .chain(branches.iter().flat_map(|(w, t)| [w, t]))
                .chain(otherwise.iter().map(|b| &**b))
                .collect(),
            BoundExpr::Agg { arg, .. } => arg.iter().map(|b| &**b).collect(),
        }
    }

    /// Rebuilds this node with each child replaced by `f(child)`.
    pub fn try_map_children(
        self,
        f: &mut dyn FnMut(BoundExpr) -> Result<BoundExpr, SqlError>,
    ) -> Result<BoundExpr, SqlError> {
        let bx = |b: Box<BoundExpr>, f: &mut dyn FnMut(BoundExpr) -> Result<BoundExpr, SqlError>| {
            f(*b).map(Box::new)
        };
        Ok(match self {
            e @ (BoundExpr::Slot(_) | BoundExpr::Literal(_)) => e,
            BoundExpr::Unary { op, expr } => BoundExpr::Unary { op, expr: bx(expr, f)? },
            BoundExpr::Binary { op, left, right } => BoundExpr::Binary {
                op,
                left: bx(left, f)?,
                right: bx(right, f)?,
            },
            BoundExpr::Scalar { func, args } => BoundExpr::Scalar {
                func,
                args: args.into_iter().map(&mut *f).collect::<Result<_, _>>()?,
            },
            BoundExpr::Udf { name, args } => BoundExpr::Udf {
                name,
                args: args.into_iter().map(&mut *f).collect::<Result<_, _>>()?,
            },
            BoundExpr::IsNull { expr, negated } => BoundExpr::IsNull {
                expr: bx(expr, f)?,
                negated,
            },
            BoundExpr::InList { expr, list, negated } => BoundExpr::InList {
                expr: bx(expr, f)?,
                list: list.into_iter().map(&mut *f).collect::<Result<_, _>>()?,
                negated,
            },
            BoundExpr::Between {
                expr,
                low,
                high,
                negated,
            } => BoundExpr::Between {
                expr: bx(expr, f)?,
                low: bx(low, f)?,
                high: bx(high, f)?,
                negated,
            },
            BoundExpr::Like { expr, pattern, negated } => BoundExpr::Like {
                expr: bx(expr, f)?,
                pattern: bx(pattern, f)?,
                negated,
            },
            BoundExpr::Case {
                operand,
                branches,
                otherwise,
            } => BoundExpr::Case {
                operand: operand.map(|o| bx(o, f)).transpose()?,
                branches: branches
                    .into_iter()
                    .map(|(w, t)| Ok((f(w)?, f(t)?)))
                    .collect::<Result<_, SqlError>>()?,
                otherwise: otherwise.map(|o| bx(o, f)).transpose()?,
            },
            BoundExpr::Cast { expr, to } => BoundExpr::Cast { expr: bx(expr, f)?, to },
            BoundExpr::Agg { func, arg, distinct } => BoundExpr::Agg {
                func,
                arg: arg.map(|a| bx(a, f)).transpose()?,
                distinct,
            },
        })
    }

    pub fn any(&self, pred: &dyn Fn(&BoundExpr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn slots(&self, out: &mut Vec<usize>) {
        if let BoundExpr::Slot(i) = self {
            out.push(*i);
        }
        for c in self.children() {
            c.slots(out);
        }
    }

    pub fn contains_agg(&self) -> bool {
        self.any(&|e| matches!(e, BoundExpr::Agg { .. }))
    }

    pub fn contains_udf(&self) -> bool {
        self.any(&|e| matches!(e, BoundExpr::Udf { .. }))
    }
}

impl fmt::Display for BoundExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, items: &[BoundExpr]| -> fmt::Result {
            for (i, a) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            Ok(())
        };
        match self {
            BoundExpr::Slot(i) => write!(f, "#{i}"),
            BoundExpr::Literal(Value::String(s)) => write!(f, "'{s}'"),
            BoundExpr::Literal(v) => write!(f, "{v}"),
            BoundExpr::Unary { op: UnaryOp::Neg, expr } => write!(f, "-{expr}"),
            BoundExpr::Unary { op: UnaryOp::Not, expr } => write!(f, "NOT {expr}"),
            BoundExpr::Binary { op, left, right } => write!(f, "({left} {} {right})", op.symbol()),
            BoundExpr::Scalar { func, args } => {
                write!(f, "{}(", func.name())?;
                list(f, args)?;
                f.write_str(")")
            }
            BoundExpr::Udf { name, args } => {
                write!(f, "{name}(")?;
                list(f, args)?;
                f.write_str(")")
            }
            BoundExpr::Agg { func, arg: None, .. } => write!(f, "{}(*)", func.name()),
            BoundExpr::Agg { func, arg: Some(a), distinct } => {
                write!(f, "{}({}{a})", func.name(), if *distinct { "DISTINCT " } else { "" })
            }
            BoundExpr::IsNull { expr, negated } => write!(f, "{expr} IS {}NULL", if *negated { "NOT " } else { "" }),
            BoundExpr::InList { expr, list: l, negated } => {
                write!(f, "{expr} {}IN (", if *negated { "NOT " } else { "" })?;
                list(f, l)?;
                f.write_str(")")
            }
            BoundExpr::Between { expr, low, high, negated } => {
                write!(f, "{expr} {}BETWEEN {low} AND {high}", if *negated { "NOT " } else { "" })
            }
            BoundExpr::Like { expr, pattern, negated } => {
                write!(f, "{expr} {}LIKE {pattern}", if *negated { "NOT " } else { "" })
            }
            BoundExpr::Case { .. } => f.write_str("CASE ... END"),
            BoundExpr::Cast { expr, to } => write!(f, "CAST({expr} AS {to})"),
        }
    }
}

type EvalResult = Result<Value, SqlError>;

/// Evaluates `expr` over `row`, forcing only the cells it actually needs.
pub fn eval<'a>(expr: &'a BoundExpr, row: &'a [DeferredCell], ctx: &'a ExecCtx) -> BoxFuture<'a, EvalResult> {
    async move {
        match expr {
            BoundExpr::Slot(i) => match row.get(*i) {
                Some(cell) => cell.force(ctx).await,
                None => Err(SqlError::Eval(format!("row has no slot {i}"))),
            },
            BoundExpr::Literal(v) => Ok(v.clone()),
            BoundExpr::Unary { op, expr } => {
                let v = eval(expr, row, ctx).await?;
                unary(*op, v)
            }
            BoundExpr::Binary {
                op: op @ (BinaryOp::And | BinaryOp::Or),
                left,
                right,
            } => {
                let l = truth(eval(left, row, ctx).await?, op.symbol())?;
                // Short-circuit so the right side's cells stay unforced when possible.
                match (op, l) {
                    (BinaryOp::And, Some(false)) => return Ok(Value::Boolean(false)),
                    (BinaryOp::Or, Some(true)) => return Ok(Value::Boolean(true)),
                    _ => {}
                }
                let r = truth(eval(right, row, ctx).await?, op.symbol())?;
                Ok(match (l, r) {
                    (Some(a), Some(b)) => Value::Boolean(if *op == BinaryOp::And { a && b } else { a || b }),
                    (_, Some(false)) if *op == BinaryOp::And => Value::Boolean(false),
                    (_, Some(true)) if *op == BinaryOp::Or => Value::Boolean(true),
                    _ => Value::Null,
                })
            }
            BoundExpr::Binary { op, left, right } => {
                let l = eval(left, row, ctx).await?;
                let r = eval(right, row, ctx).await?;
                binary(*op, &l, &r)
            }
            BoundExpr::Scalar {
                func: Scalar::Coalesce,
                args,
            } => {
                for a in args {
                    let v = eval(a, row, ctx).await?;
                    if !v.is_null() {
                        return Ok(v);
                    }
                }
                Ok(Value::Null)
            }
            BoundExpr::Scalar { func, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(eval(a, row, ctx).await?);
                }
                scalar(*func, &vals)
            }
            BoundExpr::IsNull { expr, negated } => {
                let v = eval(expr, row, ctx).await?;
                Ok(Value::Boolean(v.is_null() != *negated))
            }
            BoundExpr::InList { expr, list, negated } => {
                let v = eval(expr, row, ctx).await?;
                if v.is_null() {
                    return Ok(Value::Null);
                }
                let mut saw_null = false;
                for item in list {
                    let c = eval(item, row, ctx).await?;
                    match compare(BinaryOp::Eq, &v, &c)? {
                        Value::Boolean(true) => return Ok(Value::Boolean(!*negated)),
                        Value::Null => saw_null = true,
                        _ => {}
                    }
                }
                Ok(if saw_null { Value::Null } else { Value::Boolean(*negated) })
            }
            BoundExpr::Between {
                expr,
                low,
                high,
                negated,
            } => {
                let v = eval(expr, row, ctx).await?;
                let lo = compare(BinaryOp::GtEq, &v, &eval(low, row, ctx).await?)?;
                let hi = compare(BinaryOp::LtEq, &v, &eval(high, row, ctx).await?)?;
                let both = match (truth(lo, "BETWEEN")?, truth(hi, "BETWEEN")?) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                };
                Ok(match both {
                    Some(b) => Value::Boolean(b != *negated),
                    None => Value::Null,
                })
            }
            BoundExpr::Like { expr, pattern, negated } => {
                let v = eval(expr, row, ctx).await?;
                let p = eval(pattern, row, ctx).await?;
                match (&v, &p) {
                    (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
                    (Value::String(s), Value::String(p)) => Ok(Value::Boolean(like(s, p) != *negated)),
                    _ => Err(SqlError::Type(format!(
                        "LIKE needs VARCHAR operands, got {} and {}",
                        v.type_name(),
                        p.type_name()
                    ))),
                }
            }
            BoundExpr::Case {
                operand,
                branches,
                otherwise,
            } => {
                let subject = match operand {
                    Some(o) => Some(eval(o, row, ctx).await?),
                    None => None,
                };
                for (when, then) in branches {
                    let w = eval(when, row, ctx).await?;
                    let hit = match &subject {
                        Some(s) => compare(BinaryOp::Eq, s, &w)? == Value::Boolean(true),
                        None => truth(w, "CASE WHEN")? == Some(true),
                    };
                    if hit {
                        return eval(then, row, ctx).await;
                    }
                }
                match otherwise {
                    Some(e) => eval(e, row, ctx).await,
                    None => Ok(Value::Null),
                }
            }
            BoundExpr::Cast { expr, to } => cast(eval(expr, row, ctx).await?, *to),
            BoundExpr::Udf { name, .. } => Err(SqlError::Eval(format!("unplanned udf call {name}"))),
            BoundExpr::Agg { func, .. } => Err(SqlError::Eval(format!("unplanned aggregate {}", func.name()))),
        }
    }
    .boxed()
}

/// Evaluates a predicate; NULL and FALSE both reject.
pub async fn eval_predicate(expr: &BoundExpr, row: &[DeferredCell], ctx: &ExecCtx) -> Result<bool, SqlError> {
    Ok(truth(eval(expr, row, ctx).await?, "WHERE")? == Some(true))
}

/// Owned-argument form for spawned tasks.
pub async fn eval_all(exprs: Arc<Vec<BoundExpr>>, row: Arc<[DeferredCell]>, ctx: ExecCtx) -> Result<Vec<Value>, SqlError> {
    let mut out = Vec::with_capacity(exprs.len());
    for e in exprs.iter() {
        out.push(eval(e, &row, &ctx).await?);
    }
    Ok(out)
}

fn truth(v: Value, context: &str) -> Result<Option<bool>, SqlError> {
    match v {
        Value::Null => Ok(None),
        Value::Boolean(b) => Ok(Some(b)),
        other => Err(SqlError::Type(format!(
            "{context} expects BOOLEAN, got {}",
            other.type_name()
        ))),
    }
}

fn is_numeric(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Float(_) | Value::Decimal(_))
}

fn unary(op: UnaryOp, v: Value) -> EvalResult {
    match (op, v) {
        (_, Value::Null) => Ok(Value::Null),
        (UnaryOp::Not, Value::Boolean(b)) => Ok(Value::Boolean(!b)),
        (UnaryOp::Neg, Value::Int(i)) => i
            .checked_neg()
            .map(Value::Int)
            .ok_or_else(|| SqlError::Eval("integer overflow".into())),
        (UnaryOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
        (UnaryOp::Neg, Value::Decimal(d)) => Ok(Value::Decimal(crate::value::Decimal::new(-d.unscaled, d.scale))),
        (op, v) => Err(SqlError::Type(format!(
            "cannot apply {} to {}",
            if op == UnaryOp::Not { "NOT" } else { "unary minus" },
            v.type_name()
        ))),
    }
}

pub(crate) fn compare(op: BinaryOp, a: &Value, b: &Value) -> EvalResult {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    let nan = |v: &Value| matches!(v, Value::Float(x) if x.is_nan());
    if nan(a) || nan(b) {
        if is_numeric(a) && is_numeric(b) {
            return Ok(Value::Boolean(op == BinaryOp::NotEq));
        }
    }
    let Some(ord) = sql_cmp(a, b) else {
        return Err(SqlError::Type(format!(
            "cannot compare {} with {} (use CAST to convert)",
            a.type_name(),
            b.type_name()
        )));
    };
    Ok(Value::Boolean(match op {
        BinaryOp::Eq => ord == Ordering::Equal,
        BinaryOp::NotEq => ord != Ordering::Equal,
        BinaryOp::Lt => ord == Ordering::Less,
        BinaryOp::LtEq => ord != Ordering::Greater,
        BinaryOp::Gt => ord == Ordering::Greater,
        _ => ord != Ordering::Less,
    }))
}

pub(crate) fn binary(op: BinaryOp, a: &Value, b: &Value) -> EvalResult {
    if op.is_comparison() {
        return compare(op, a, b);
    }
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    if op == BinaryOp::Concat {
        return Ok(Value::string(format!("{a}{b}")));
    }
    if !is_numeric(a) || !is_numeric(b) {
        return Err(SqlError::Type(format!(
            "operator {} needs numeric operands, got {} and {}",
            op.symbol(),
            a.type_name(),
            b.type_name()
        )));
    }
    let overflow = || SqlError::Eval("integer overflow".into());
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        return match op {
            BinaryOp::Add => x.checked_add(*y).map(Value::Int).ok_or_else(overflow),
            BinaryOp::Sub => x.checked_sub(*y).map(Value::Int).ok_or_else(overflow),
            BinaryOp::Mul => x.checked_mul(*y).map(Value::Int).ok_or_else(overflow),
            BinaryOp::Mod if *y == 0 => Ok(Value::Null),
            BinaryOp::Mod => Ok(Value::Int(x.wrapping_rem(*y))),
            _ if *y == 0 => Ok(Value::Null),
            _ => Ok(Value::Float(*x as f64 / *y as f64)),
        };
    }
    let (x, y) = (a.as_f64().unwrap_or(0.0), b.as_f64().unwrap_or(0.0));
    Ok(match op {
        BinaryOp::Add => Value::Float(x + y),
        BinaryOp::Sub => Value::Float(x - y),
        BinaryOp::Mul => Value::Float(x * y),
        _ if y == 0.0 => Value::Null,
        BinaryOp::Div => Value::Float(x / y),
        _ => Value::Float(x % y),
    })
}

/// SQL LIKE with `%` and `_`, no escape character.
pub(crate) fn like(s: &str, pattern: &str) -> bool {
    let s: Vec<char> = s.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut si, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == s[si])) {
            si += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, si));
            pi += 1;
        } else if let Some((sp, ss)) = star {
            pi = sp + 1;
            si = ss + 1;
            star = Some((sp, ss + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|c| *c == '%')
}

fn cast(v: Value, to: CastType) -> EvalResult {
    let fail = |v: &Value| SqlError::Type(format!("cannot cast {} '{v}' to {to}", v.type_name()));
    if v.is_null() {
        return Ok(Value::Null);
    }
    Ok(match to {
        CastType::Int => match &v {
            Value::Int(_) => v,
            Value::Float(x) if x.is_finite() => Value::Int(x.trunc() as i64),
            Value::Decimal(d) => Value::Int(d.to_f64().trunc() as i64),
            Value::Boolean(b) => Value::Int(*b as i64),
            Value::String(s) => match s.trim().parse::<i64>() {
                Ok(i) => Value::Int(i),
                Err(_) => match s.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Int(x.trunc() as i64),
                    _ => return Err(fail(&v)),
                },
            },
            _ => return Err(fail(&v)),
        },
        CastType::Float => match &v {
            Value::Int(_) | Value::Float(_) | Value::Decimal(_) => Value::Float(v.as_f64().unwrap_or(0.0)),
            Value::Boolean(b) => Value::Float(*b as i64 as f64),
            Value::String(s) => s.trim().parse().map(Value::Float).map_err(|_| fail(&v))?,
            _ => return Err(fail(&v)),
        },
        CastType::Text => match &v {
            Value::String(_) => v,
            other => Value::string(other.to_string()),
        },
        CastType::Boolean => match &v {
            Value::Boolean(_) => v,
            Value::Int(i) => Value::Boolean(*i != 0),
            Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
                "true" | "t" | "yes" | "1" => Value::Boolean(true),
                "false" | "f" | "no" | "0" => Value::Boolean(false),
                _ => return Err(fail(&v)),
            },
            _ => return Err(fail(&v)),
        },
    })
}

fn scalar(func: Scalar, args: &[Value]) -> EvalResult {
    let name = func.name();
    let text = |i: usize| -> Result<Option<&str>, SqlError> {
        match &args[i] {
            Value::Null => Ok(None),
            Value::String(s) => Ok(Some(s)),
            other => Err(SqlError::Type(format!(
                "{name}() expects VARCHAR, got {}",
                other.type_name()
            ))),
        }
    };
    let int = |i: usize| -> Result<Option<i64>, SqlError> {
        match &args[i] {
            Value::Null => Ok(None),
            Value::Int(n) => Ok(Some(*n)),
            other => Err(SqlError::Type(format!(
                "{name}() expects BIGINT, got {}",
                other.type_name()
            ))),
        }
    };
    let num = |i: usize| -> Result<Option<&Value>, SqlError> {
        match &args[i] {
            Value::Null => Ok(None),
            v if is_numeric(v) => Ok(Some(v)),
            other => Err(SqlError::Type(format!(
                "{name}() expects a number, got {}",
                other.type_name()
            ))),
        }
    };
    let s = |x: String| Ok(Value::string(x));
    match func {
        Scalar::Length => match &args[0] {
            Value::Null => Ok(Value::Null),
            Value::String(x) => Ok(Value::Int(x.chars().count() as i64)),
            Value::Binary(b) => Ok(Value::Int(b.len() as i64)),
            Value::List(l) => Ok(Value::Int(l.len() as i64)),
            other => Err(SqlError::Type(format!("length() expects VARCHAR, got {}", other.type_name()))),
        },
        Scalar::Lower => text(0)?.map_or(Ok(Value::Null), |x| s(x.to_lowercase())),
        Scalar::Upper => text(0)?.map_or(Ok(Value::Null), |x| s(x.to_uppercase())),
        Scalar::Trim => text(0)?.map_or(Ok(Value::Null), |x| s(x.trim().to_string())),
        Scalar::Ltrim => text(0)?.map_or(Ok(Value::Null), |x| s(x.trim_start().to_string())),
        Scalar::Rtrim => text(0)?.map_or(Ok(Value::Null), |x| s(x.trim_end().to_string())),
        Scalar::Substr => {
            let (Some(x), Some(start)) = (text(0)?, int(1)?) else {
                return Ok(Value::Null);
            };
            let len = if args.len() > 2 {
                match int(2)? {
                    Some(l) => Some(l.max(0) as usize),
                    None => return Ok(Value::Null),
                }
            } else {
                None
            };
            // 1-based; positions before the start eat into the length.
            let skip = (start - 1).max(0) as usize;
            let len = len.map(|l| l.saturating_sub((1 - start).max(0) as usize));
            let it = x.chars().skip(skip);
            s(match len {
                Some(l) => it.take(l).collect(),
                None => it.collect(),
            })
        }
        Scalar::Replace => match (text(0)?, text(1)?, text(2)?) {
            (Some(x), Some(from), Some(to)) if !from.is_empty() => s(x.replace(from, to)),
            (Some(x), Some(_), Some(_)) => s(x.to_string()),
            _ => Ok(Value::Null),
        },
        Scalar::Concat => s(args.iter().filter(|v| !v.is_null()).map(|v| v.to_string()).collect()),
        Scalar::Abs => Ok(match num(0)? {
            None => Value::Null,
            Some(Value::Int(i)) => Value::Int(i.checked_abs().ok_or_else(|| SqlError::Eval("integer overflow".into()))?),
            Some(v) => Value::Float(v.as_f64().unwrap_or(0.0).abs()),
        }),
        Scalar::Round => {
            let digits = if args.len() > 1 { int(1)? } else { Some(0) };
            Ok(match (num(0)?, digits) {
                (None, _) | (_, None) => Value::Null,
                (Some(Value::Int(i)), Some(d)) if d >= 0 => Value::Int(*i),
                (Some(v), Some(d)) => {
                    let f = 10f64.powi(d as i32);
                    Value::Float((v.as_f64().unwrap_or(0.0) * f).round() / f)
                }
            })
        }
        Scalar::Floor | Scalar::Ceil => Ok(match num(0)? {
            None => Value::Null,
            Some(Value::Int(i)) => Value::Int(*i),
            Some(v) => {
                let x = v.as_f64().unwrap_or(0.0);
                Value::Float(if func == Scalar::Floor { x.floor() } else { x.ceil() })
            }
        }),
        Scalar::Nullif => Ok(if compare(BinaryOp::Eq, &args[0], &args[1])? == Value::Boolean(true) {
            Value::Null
        } else {
            args[0].clone()
        }),
        Scalar::StartsWith => Ok(match (text(0)?, text(1)?) {
            (Some(x), Some(p)) => Value::Boolean(x.starts_with(p)),
            _ => Value::Null,
        }),
        Scalar::Contains => Ok(match (text(0)?, text(1)?) {
            (Some(x), Some(p)) => Value::Boolean(x.contains(p)),
            _ => Value::Null,
        }),
        Scalar::Coalesce => Ok(args.iter().find(|v| !v.is_null()).cloned().unwrap_or(Value::Null)),
    }
}
