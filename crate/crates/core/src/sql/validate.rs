use std::fmt;

use serde::Serialize;

use super::parse::{AggFn, Expr, Literal, OrderKey, OrderTarget, SelectItem, SqlAst};
use super::{ColumnSchema, ColumnType, SqlError};
use crate::grid::CellValue;

/// An AST whose columns resolve against a schema, with the row cap applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedSql {
    ast: SqlAst,
    row_cap: usize,
    cap_bound: bool,
}

impl ValidatedSql {
    pub fn ast(&self) -> &SqlAst {
        &self.ast
    }

    pub fn row_cap(&self) -> usize {
        self.row_cap
    }

    /// True when the row cap, not a smaller user LIMIT, sets the effective limit.
    pub fn cap_bound(&self) -> bool {
        self.cap_bound
    }

    /// Canonical SQL text after validation (resolved names, LIMIT present).
    pub fn text(&self) -> String {
        self.ast.to_string()
    }
}

impl fmt::Display for ValidatedSql {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

struct Resolver<'a> {
    schema: &'a [ColumnSchema],
}

impl Resolver<'_> {
    fn column(&self, name: &str) -> Result<&ColumnSchema, SqlError> {
        if let Some(c) = self.schema.iter().find(|c| c.name.eq_ignore_ascii_case(name)) {
            return Ok(c);
        }
        let lower = name.to_ascii_lowercase();
        let suggestion = self
            .schema
            .iter()
            .min_by_key(|c| (strsim::levenshtein(&lower, &c.name), c.name.clone()))
            .map(|c| c.name.clone());
        Err(SqlError::UnknownColumn { name: name.to_string(), suggestion })
    }

    fn resolve(&self, name: &mut String) -> Result<ColumnType, SqlError> {
        let c = self.column(name)?;
        *name = c.name.clone();
        Ok(c.col_type)
    }

    fn literal(&self, column: &str, ty: ColumnType, lit: &mut Literal) -> Result<(), SqlError> {
        let ok = match (ty, &*lit) {
            (ColumnType::Integer | ColumnType::Real, Literal::Int(_) | Literal::Real(_)) => true,
            (ColumnType::Text, Literal::Text(_)) => true,
            (ColumnType::Boolean, Literal::Bool(_)) => true,
            (ColumnType::Date, Literal::Text(s)) => match CellValue::from_text(s).iso_date {
                Some(iso) => {
                    *lit = Literal::Text(iso);
                    true
                }
                None => false,
            },
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SqlError::TypeMismatch { column: column.to_string(), col_type: ty, literal: lit.to_string() })
        }
    }

    fn expr(&self, e: &mut Expr) -> Result<(), SqlError> {
        match e {
            Expr::Cmp { column, value, .. } => {
                let ty = self.resolve(column)?;
                self.literal(column, ty, value)
            }
            Expr::Between { column, low, high, .. } => {
                let ty = self.resolve(column)?;
                self.literal(column, ty, low)?;
                self.literal(column, ty, high)
            }
            Expr::In { column, list, .. } => {
                let ty = self.resolve(column)?;
                list.iter_mut().try_for_each(|l| self.literal(column, ty, l))
            }
            Expr::Like { column, pattern, .. } => {
                let ty = self.resolve(column)?;
                if ty != ColumnType::Text {
                    return Err(SqlError::TypeMismatch {
                        column: column.clone(),
                        col_type: ty,
                        literal: Literal::Text(pattern.clone()).to_string(),
                    });
                }
                Ok(())
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            Expr::Not(inner) => self.expr(inner),
        }
    }

    fn aggregate(&self, func: AggFn, arg: &mut Option<String>) -> Result<(), SqlError> {
        let Some(name) = arg else { return Ok(()) };
        let ty = self.resolve(name)?;
        if matches!(func, AggFn::Sum | AggFn::Avg) && !ty.is_numeric() {
            return Err(SqlError::InvalidAggregate(format!("{}({name}) needs a numeric column, found {ty}", func.as_str())));
        }
        Ok(())
    }
}

/// Resolves every column against `schema` (case-insensitive), checks literal
/// types and grouping, and injects or lowers LIMIT to `row_cap`.
pub fn validate(mut ast: SqlAst, schema: &[ColumnSchema], row_cap: usize) -> Result<ValidatedSql, SqlError> {
    let r = Resolver { schema };
    for item in &mut ast.projections {
        match item {
            SelectItem::Star => {}
            SelectItem::Column { name, .. } => {
                r.resolve(name)?;
            }
            SelectItem::Aggregate { func, arg, .. } => r.aggregate(*func, arg)?,
        }
    }
    if let Some(w) = &mut ast.where_clause {
        r.expr(w)?;
    }
    for g in &mut ast.group_by {
        r.resolve(g)?;
    }
    let mut order_by = Vec::with_capacity(ast.order_by.len());
    for key in std::mem::take(&mut ast.order_by) {
        order_by.push(resolve_order(&r, &ast.projections, key)?);
    }
    ast.order_by = order_by;

    let aggregated = !ast.group_by.is_empty() || ast.projections.iter().any(SelectItem::is_aggregate);
    if aggregated {
        for item in &ast.projections {
            match item {
                SelectItem::Star => {
                    return Err(SqlError::InvalidGrouping("* cannot be combined with aggregation".into()));
                }
                SelectItem::Column { name, .. } if !ast.group_by.contains(name) => {
                    return Err(SqlError::InvalidGrouping(format!(
                        "column {name} must appear in GROUP BY or inside an aggregate"
                    )));
                }
                _ => {}
            }
        }
        for key in &ast.order_by {
            if let OrderTarget::Column(name) = &key.target {
                if !ast.group_by.contains(name) {
                    return Err(SqlError::InvalidGrouping(format!("ORDER BY {name} is neither grouped nor aggregated")));
                }
            }
        }
    } else if ast.order_by.iter().any(|k| matches!(k.target, OrderTarget::Aggregate { .. })) {
        return Err(SqlError::InvalidAggregate("ORDER BY aggregate in a non-aggregate query".into()));
    }

    let cap = row_cap as u64;
    let cap_bound = ast.limit.is_none_or(|n| n >= cap);
    ast.limit = Some(ast.limit.map_or(cap, |n| n.min(cap)));
    Ok(ValidatedSql { ast, row_cap, cap_bound })
}

fn resolve_order(r: &Resolver, projections: &[SelectItem], key: OrderKey) -> Result<OrderKey, SqlError> {
    let descending = key.descending;
    let target = match key.target {
        OrderTarget::Column(name) => {
            let aliased = projections.iter().find(|p| p.alias().is_some_and(|a| a.eq_ignore_ascii_case(&name)));
            match aliased {
                Some(SelectItem::Column { name, .. }) => OrderTarget::Column(name.clone()),
                Some(SelectItem::Aggregate { func, arg, .. }) => OrderTarget::Aggregate { func: *func, arg: arg.clone() },
                _ => OrderTarget::Column(r.column(&name)?.name.clone()),
            }
        }
        OrderTarget::Aggregate { func, mut arg } => {
            r.aggregate(func, &mut arg)?;
            OrderTarget::Aggregate { func, arg }
        }
    };
    Ok(OrderKey { target, descending })
}
