use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::parse::{AggFn, CmpOp, Expr, Literal, OrderTarget, SelectItem};
use super::{ColumnType, RelationalTable, SqlError, SqlValue, TableRow, ValidatedSql};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
    /// The row cap cut the output short.
    pub truncated: bool,
    /// Sheet rows (0-based) that contributed to each output row.
    pub source_rows: Vec<Vec<usize>>,
}

impl ResultRows {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Order-insensitive identity: rendered tuples, sorted, joined by "; ".
    pub fn signature(&self) -> String {
        let mut tuples: Vec<String> = self.rows.iter().map(|r| render_tuple(r)).collect();
        tuples.sort();
        tuples.join("; ")
    }
}

pub(crate) fn render_tuple(row: &[SqlValue]) -> String {
    row.iter().map(SqlValue::render).collect::<Vec<_>>().join(" | ")
}

fn lit_value(l: &Literal) -> SqlValue {
    match l {
        Literal::Int(i) => SqlValue::Int(*i),
        Literal::Real(r) => SqlValue::Real(*r),
        Literal::Text(s) => SqlValue::Text(s.clone()),
        Literal::Bool(b) => SqlValue::Bool(*b),
    }
}

fn like(value: &str, pattern: &str) -> bool {
    let v: Vec<char> = value.to_lowercase().chars().collect();
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    // dp[j]: pattern prefix of length j matches the value prefix consumed so far.
    let mut dp = vec![false; p.len() + 1];
    dp[0] = true;
    for j in 1..=p.len() {
        dp[j] = dp[j - 1] && p[j - 1] == '%';
    }
    for &c in &v {
        let mut next = vec![false; p.len() + 1];
        for j in 1..=p.len() {
            next[j] = match p[j - 1] {
                '%' => next[j - 1] || dp[j],
                '_' => dp[j - 1],
                pc => dp[j - 1] && pc == c,
            };
        }
        dp = next;
    }
    dp[p.len()]
}

struct Ctx<'a> {
    table: &'a RelationalTable,
    index: HashMap<&'a str, usize>,
}

impl<'a> Ctx<'a> {
    fn new(table: &'a RelationalTable) -> Self {
        let index = table.schema.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
        Ctx { table, index }
    }

    fn col(&self, name: &str) -> usize {
        self.index[name]
    }

    /// Three-valued predicate evaluation; `None` is SQL UNKNOWN.
    fn eval(&self, e: &Expr, row: &TableRow) -> Option<bool> {
        match e {
            Expr::Cmp { column, op, value } => {
                let ord = row.values[self.col(column)].sql_cmp(&lit_value(value))?;
                Some(match op {
                    CmpOp::Eq => ord == Ordering::Equal,
                    CmpOp::Ne => ord != Ordering::Equal,
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Ge => ord != Ordering::Less,
                })
            }
            Expr::Between { column, low, high, negated } => {
                let v = &row.values[self.col(column)];
                let ge = v.sql_cmp(&lit_value(low)).map(|o| o != Ordering::Less);
                let le = v.sql_cmp(&lit_value(high)).map(|o| o != Ordering::Greater);
                and3(ge, le).map(|b| b != *negated)
            }
            Expr::In { column, list, negated } => {
                let v = &row.values[self.col(column)];
                if v.is_null() {
                    return None;
                }
                let hit = list.iter().any(|l| v.sql_cmp(&lit_value(l)) == Some(Ordering::Equal));
                Some(hit != *negated)
            }
            Expr::Like { column, pattern, negated } => match &row.values[self.col(column)] {
                SqlValue::Text(s) => Some(like(s, pattern) != *negated),
                _ => None,
            },
            Expr::And(a, b) => and3(self.eval(a, row), self.eval(b, row)),
            Expr::Or(a, b) => match (self.eval(a, row), self.eval(b, row)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Expr::Not(inner) => self.eval(inner, row).map(|b| !b),
        }
    }

    fn aggregate(&self, func: AggFn, arg: Option<&str>, rows: &[&TableRow]) -> Result<SqlValue, SqlError> {
        let Some(name) = arg else {
            return Ok(SqlValue::Int(rows.len() as i64));
        };
        let j = self.col(name);
        let values: Vec<&SqlValue> = rows.iter().map(|r| &r.values[j]).filter(|v| !v.is_null()).collect();
        let overflow = || SqlError::Overflow(format!("{}({name})", func.as_str()));
        Ok(match func {
            AggFn::Count => SqlValue::Int(values.len() as i64),
            _ if values.is_empty() => SqlValue::Null,
            AggFn::Sum if self.table.schema[j].col_type == ColumnType::Integer => {
                let mut acc: i64 = 0;
                for v in values {
                    if let SqlValue::Int(i) = v {
                        acc = acc.checked_add(*i).ok_or_else(overflow)?;
                    }
                }
                SqlValue::Int(acc)
            }
            AggFn::Sum | AggFn::Avg => {
                let sum: f64 = values.iter().filter_map(|v| v.as_f64()).sum();
                let out = if func == AggFn::Avg { sum / values.len() as f64 } else { sum };
                if !out.is_finite() {
                    return Err(overflow());
                }
                SqlValue::Real(out)
            }
            AggFn::Min => values.into_iter().min_by(|a, b| a.sort_cmp(b)).cloned().unwrap_or(SqlValue::Null),
            AggFn::Max => values.into_iter().reduce(|a, b| if b.sort_cmp(a) == Ordering::Greater { b } else { a }).cloned().unwrap_or(SqlValue::Null),
        })
    }
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn output_columns(v: &ValidatedSql, table: &RelationalTable) -> Vec<String> {
    let mut out = Vec::new();
    for item in &v.ast().projections {
        match item {
            SelectItem::Star => out.extend(table.schema.iter().map(|c| c.name.clone())),
            SelectItem::Column { name, alias } => out.push(alias.clone().unwrap_or_else(|| name.clone())),
            SelectItem::Aggregate { func, arg, alias } => out.push(alias.clone().unwrap_or_else(|| {
                format!("{}({})", func.as_str().to_ascii_lowercase(), arg.as_deref().unwrap_or("*"))
            })),
        }
    }
    out
}

fn compare_keys(a: &[SqlValue], b: &[SqlValue], desc: &[bool]) -> Ordering {
    for ((x, y), &d) in a.iter().zip(b).zip(desc) {
        let o = x.sort_cmp(y);
        let o = if d { o.reverse() } else { o };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Runs a validated query. Output order is ORDER BY (stable, NULLs first
/// ascending) or else table order; groups appear in first-seen order.
pub fn execute(query: &ValidatedSql, table: &RelationalTable) -> Result<ResultRows, SqlError> {
    let ast = query.ast();
    let ctx = Ctx::new(table);
    let filtered: Vec<&TableRow> = table
        .rows
        .iter()
        .filter(|r| ast.where_clause.as_ref().is_none_or(|w| ctx.eval(w, r) == Some(true)))
        .collect();
    let desc: Vec<bool> = ast.order_by.iter().map(|k| k.descending).collect();
    let aggregated = !ast.group_by.is_empty() || ast.projections.iter().any(SelectItem::is_aggregate);

    // (sort key, output tuple, contributing sheet rows)
    let mut out: Vec<(Vec<SqlValue>, Vec<SqlValue>, Vec<usize>)> = Vec::new();
    if aggregated {
        let mut groups: Vec<Vec<&TableRow>> = Vec::new();
        if ast.group_by.is_empty() {
            groups.push(filtered);
        } else {
            let cols: Vec<usize> = ast.group_by.iter().map(|g| ctx.col(g)).collect();
            let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
            for r in filtered {
                let key: Vec<String> = cols.iter().map(|&j| r.values[j].group_key()).collect();
                let slot = *seen.entry(key).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[slot].push(r);
            }
        }
        for members in groups {
            let first = members.first();
            let group_value = |name: &str| first.map_or(SqlValue::Null, |r| r.values[ctx.col(name)].clone());
            let mut tuple = Vec::new();
            for item in &ast.projections {
                match item {
                    SelectItem::Column { name, .. } => tuple.push(group_value(name)),
                    SelectItem::Aggregate { func, arg, .. } => tuple.push(ctx.aggregate(*func, arg.as_deref(), &members)?),
                    SelectItem::Star => unreachable!("validated: * is not aggregated"),
                }
            }
            let mut key = Vec::new();
            for k in &ast.order_by {
                key.push(match &k.target {
                    OrderTarget::Column(name) => group_value(name),
                    OrderTarget::Aggregate { func, arg } => ctx.aggregate(*func, arg.as_deref(), &members)?,
                });
            }
            out.push((key, tuple, members.iter().map(|r| r.source_row).collect()));
        }
    } else {
        for r in filtered {
            let mut tuple = Vec::new();
            for item in &ast.projections {
                match item {
                    SelectItem::Star => tuple.extend(r.values.iter().cloned()),
                    SelectItem::Column { name, .. } => tuple.push(r.values[ctx.col(name)].clone()),
                    SelectItem::Aggregate { .. } => unreachable!("validated: no aggregates"),
                }
            }
            let key = ast
                .order_by
                .iter()
                .map(|k| match &k.target {
                    OrderTarget::Column(name) => r.values[ctx.col(name)].clone(),
                    OrderTarget::Aggregate { .. } => unreachable!("validated: no aggregates"),
                })
                .collect();
            out.push((key, tuple, vec![r.source_row]));
        }
    }
    if !ast.order_by.is_empty() {
        out.sort_by(|a, b| compare_keys(&a.0, &b.0, &desc));
    }
    let total = out.len();
    let limit = ast.limit.map_or(total, |n| (n as usize).min(total));
    out.truncate(limit);
    let (rows, source_rows) = out.into_iter().map(|(_, t, s)| (t, s)).unzip();
    Ok(ResultRows {
        columns: output_columns(query, table),
        rows,
        truncated: query.cap_bound() && total > query.row_cap(),
        source_rows,
    })
}
