//! Relational view of Flat sheets: schema inference, a materialized table and
//! an interpreter for a read-only SELECT subset.

mod exec;
mod parse;
mod validate;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{format_number, CellKind, CellValue, Sheet};
use crate::structure::SheetProfile;
use crate::text::split_unit_suffix;

pub use exec::{execute, ResultRows};
pub use parse::{parse_sql, AggFn, CmpOp, Expr, Literal, OrderKey, OrderTarget, SelectItem, SqlAst};
pub use validate::{validate, ValidatedSql};

/// Fixed name of the single queryable table.
pub const TABLE_NAME: &str = "t";
/// Default cap on returned rows.
pub const DEFAULT_ROW_CAP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqlError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unsupported SQL feature: {0}")]
    UnsupportedFeature(String),
    #[error("unknown column {name:?}{}", suggestion.as_ref().map(|s| format!("; did you mean {s:?}?")).unwrap_or_default())]
    UnknownColumn { name: String, suggestion: Option<String> },
    #[error("type mismatch: column {column:?} ({col_type}) compared with {literal}")]
    TypeMismatch { column: String, col_type: ColumnType, literal: String },
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("invalid aggregate: {0}")]
    InvalidAggregate(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelationalError {
    #[error("sheet {0:?} is not Flat with a single header row")]
    NotFlat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Real,
    Text,
    Boolean,
    Date,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Real)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
            ColumnType::Boolean => "boolean",
            ColumnType::Date => "date",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub original_label: String,
    pub col_type: ColumnType,
    pub unit: Option<String>,
}

/// A typed cell. Dates hold ISO-8601 text, which orders chronologically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqlValue {
    Null,
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
    Date(String),
}

impl SqlValue {
    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            SqlValue::Int(i) => Some(*i as f64),
            SqlValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Plain display text; NULL renders empty.
    pub fn render(&self) -> String {
        match self {
            SqlValue::Null => String::new(),
            SqlValue::Int(i) => i.to_string(),
            SqlValue::Real(r) => format_number(*r),
            SqlValue::Bool(b) => b.to_string(),
            SqlValue::Text(s) | SqlValue::Date(s) => s.clone(),
        }
    }

    /// SQL comparison; `None` when either side is NULL or the types are incomparable.
    pub fn sql_cmp(&self, other: &SqlValue) -> Option<Ordering> {
        use SqlValue::*;
        match (self, other) {
            (Null, _) | (_, Null) => None,
            (Int(a), Int(b)) => Some(a.cmp(b)),
            (Text(a), Text(b)) | (Date(a), Date(b)) | (Date(a), Text(b)) | (Text(a), Date(b)) => Some(a.cmp(b)),
            (Bool(a), Bool(b)) => Some(a.cmp(b)),
            _ => self.as_f64()?.partial_cmp(&other.as_f64()?),
        }
    }

    /// Total order used for sorting: NULL first, then by `sql_cmp`.
    pub(crate) fn sort_cmp(&self, other: &SqlValue) -> Ordering {
        match (self.is_null(), other.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.sql_cmp(other).unwrap_or(Ordering::Equal),
        }
    }

    /// Hashable identity for grouping; numerically equal Int/Real values collide.
    pub(crate) fn group_key(&self) -> String {
        match self {
            SqlValue::Null => "n".into(),
            SqlValue::Int(i) => format!("f{}", (*i as f64).to_bits()),
            SqlValue::Real(r) => format!("f{}", (if *r == 0.0 { 0.0f64 } else { *r }).to_bits()),
            SqlValue::Bool(b) => format!("b{b}"),
            SqlValue::Text(s) | SqlValue::Date(s) => format!("s{s}"),
        }
    }
}

/// One materialized row with the sheet row it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub source_row: usize,
    pub values: Vec<SqlValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalTable {
    pub table_name: String,
    pub schema: Vec<ColumnSchema>,
    pub rows: Vec<TableRow>,
}

impl RelationalTable {
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<TableRow>) -> Self {
        debug_assert!(rows.iter().all(|r| r.values.len() == schema.len()));
        RelationalTable { table_name: TABLE_NAME.to_string(), schema, rows }
    }

    /// Materializes a Flat sheet: one tuple per non-empty body row, cells
    /// coerced to the inferred column type (non-conforming cells become NULL).
    pub fn from_sheet<F>(sheet: &Sheet, profile: &SheetProfile<F>) -> Result<Self, RelationalError> {
        let schema = infer_schema(sheet, profile)?;
        let grid = sheet.grid();
        let rows = (profile.header_rows.last + 1..grid.n_rows())
            .filter(|&r| grid.row(r).iter().any(|c| !c.is_empty()))
            .map(|r| TableRow {
                source_row: r,
                values: grid
                    .row(r)
                    .iter()
                    .zip(&schema)
                    .map(|(c, s)| coerce(c, s.col_type))
                    .collect(),
            })
            .collect();
        Ok(RelationalTable::new(schema, rows))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Up to `n` leading rows, as shown to the SQL generator.
    pub fn sample_rows(&self, n: usize) -> Vec<Vec<SqlValue>> {
        self.rows.iter().take(n).map(|r| r.values.clone()).collect()
    }
}

fn integral(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Coerces a cell to `ty`, yielding NULL for empty or non-conforming cells.
pub fn coerce(cell: &CellValue, ty: ColumnType) -> SqlValue {
    if cell.is_empty() {
        return SqlValue::Null;
    }
    match ty {
        ColumnType::Integer => cell.number.and_then(integral).map_or(SqlValue::Null, SqlValue::Int),
        ColumnType::Real => cell.number.map_or(SqlValue::Null, SqlValue::Real),
        ColumnType::Date => cell.iso_date.clone().map_or(SqlValue::Null, SqlValue::Date),
        ColumnType::Boolean => cell.as_bool().map_or(SqlValue::Null, SqlValue::Bool),
        ColumnType::Text => SqlValue::Text(cell.text.clone()),
    }
}

/// Lowercase identifier: separators become `_`, other punctuation is dropped.
pub fn clean_name(label: &str) -> String {
    let mut out = String::new();
    for ch in label.trim().chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if (ch.is_whitespace() || ch == '_' || ch == '-' || ch == '/') && !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_').to_string();
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        format!("c_{out}")
    } else {
        out
    }
}

fn infer_type(cells: &[&CellValue]) -> ColumnType {
    let n = cells.len();
    if n == 0 {
        return ColumnType::Text;
    }
    let share = |pred: &dyn Fn(&CellValue) -> bool| cells.iter().filter(|c| pred(c)).count() * 10 >= n * 9;
    let numbers: Vec<f64> = cells.iter().filter_map(|c| c.number).collect();
    if share(&|c| c.number.and_then(integral).is_some()) && numbers.iter().all(|v| integral(*v).is_some()) {
        ColumnType::Integer
    } else if share(&|c| c.kind == CellKind::Number) {
        ColumnType::Real
    } else if share(&|c| c.kind == CellKind::Date) {
        ColumnType::Date
    } else if share(&|c| c.kind == CellKind::Boolean) {
        ColumnType::Boolean
    } else {
        ColumnType::Text
    }
}

/// Cleaned names and types for a Flat sheet with a one-row header.
///
/// A trailing parenthesized label part becomes the unit ("Debt (% of GDP)" →
/// `debt`, unit `% of GDP`). Duplicates get `_2`, `_3` suffixes; unnamed
/// columns become `col_<index>`. A column is integer/real/date/boolean when at
/// least 90% of its non-empty body cells parse that way, in that precedence.
pub fn infer_schema<F>(sheet: &Sheet, profile: &SheetProfile<F>) -> Result<Vec<ColumnSchema>, RelationalError> {
    if !profile.is_flat() || profile.header_depth != 1 {
        return Err(RelationalError::NotFlat(sheet.name().to_string()));
    }
    let grid = sheet.grid();
    let header = grid.row(profile.header_rows.first);
    let mut used: Vec<String> = Vec::new();
    let mut schema = Vec::with_capacity(grid.n_cols());
    for (j, cell) in header.iter().enumerate() {
        let (base, unit) = split_unit_suffix(&cell.text);
        let mut name = clean_name(base);
        if name.is_empty() {
            name = format!("col_{j}");
        }
        if used.contains(&name) {
            let mut i = 2;
            while used.contains(&format!("{name}_{i}")) {
                i += 1;
            }
            name = format!("{name}_{i}");
        }
        used.push(name.clone());
        let body: Vec<&CellValue> = (profile.header_rows.last + 1..grid.n_rows())
            .map(|r| &grid.row(r)[j])
            .filter(|c| !c.is_empty())
            .collect();
        schema.push(ColumnSchema {
            name,
            original_label: cell.text.clone(),
            col_type: infer_type(&body),
            unit: unit.map(str::to_string),
        });
    }
    Ok(schema)
}
