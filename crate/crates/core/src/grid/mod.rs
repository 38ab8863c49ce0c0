//! Uniform cell grid for CSV and XLSX sources, with merged-region annotations.

mod load;

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::parse_number;

pub use load::{load_workbook, load_workbook_with, LoadOptions};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("parse error in {path}{}: {message}", position_suffix(*.row, *.col))]
    ParseError {
        path: PathBuf,
        row: Option<usize>,
        col: Option<usize>,
        message: String,
    },
    #[error("cell ({row}, {col}) out of bounds for {n_rows}x{n_cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("invalid merged region {0:?}: {1}")]
    InvalidMerge(MergedRegion, &'static str),
    #[error("duplicate sheet name {0:?}")]
    DuplicateSheet(String),
    #[error("workbook has no sheets")]
    NoSheets,
}

fn position_suffix(row: Option<usize>, col: Option<usize>) -> String {
    match (row, col) {
        (Some(r), Some(c)) => format!(" at row {r}, column {c}"),
        (Some(r), None) => format!(" at row {r}"),
        _ => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Empty,
    Text,
    Number,
    Boolean,
    Date,
}

/// One grid cell: the display text exactly as authored plus typed views of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    pub kind: CellKind,
    pub text: String,
    pub number: Option<f64>,
    /// ISO-8601 form for date cells.
    pub iso_date: Option<String>,
}

impl CellValue {
    pub fn empty() -> Self {
        CellValue {
            kind: CellKind::Empty,
            text: String::new(),
            number: None,
            iso_date: None,
        }
    }

    /// Classifies display text: number (thousands separators allowed),
    /// boolean, ISO/US date, otherwise text. Whitespace-only text stays text.
    pub fn from_text(text: &str) -> Self {
        if text.is_empty() {
            return Self::empty();
        }
        if let Some(n) = parse_number(text) {
            return CellValue {
                kind: CellKind::Number,
                text: text.to_string(),
                number: Some(n),
                iso_date: None,
            };
        }
        let trimmed = text.trim();
        if trimmed.eq_ignore_ascii_case("true") || trimmed.eq_ignore_ascii_case("false") {
            return CellValue {
                kind: CellKind::Boolean,
                text: text.to_string(),
                number: None,
                iso_date: None,
            };
        }
        if let Some(iso) = parse_date(trimmed) {
            return CellValue {
                kind: CellKind::Date,
                text: text.to_string(),
                number: None,
                iso_date: Some(iso),
            };
        }
        CellValue {
            kind: CellKind::Text,
            text: text.to_string(),
            number: None,
            iso_date: None,
        }
    }

    pub fn number(v: f64) -> Self {
        CellValue {
            kind: CellKind::Number,
            text: format_number(v),
            number: Some(v),
            iso_date: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == CellKind::Empty
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind {
            CellKind::Boolean => Some(self.text.trim().eq_ignore_ascii_case("true")),
            _ => None,
        }
    }
}

/// Shortest round-tripping decimal text; integral values print without a fraction.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn parse_date(text: &str) -> Option<String> {
    const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y"];
    const DATETIME_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"];
    for f in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(text, f) {
            return Some(d.format("%Y-%m-%d").to_string());
        }
    }
    for f in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, f) {
            return Some(iso_datetime(dt));
        }
    }
    None
}

pub(crate) fn iso_datetime(dt: NaiveDateTime) -> String {
    if dt.time() == chrono::NaiveTime::MIN {
        dt.date().format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

/// Inclusive rectangle of cells authored as one merged cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MergedRegion {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl MergedRegion {
    pub fn new(top: usize, left: usize, bottom: usize, right: usize) -> Self {
        MergedRegion { top, left, bottom, right }
    }

    pub fn area(&self) -> usize {
        (self.bottom - self.top + 1) * (self.right - self.left + 1)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..=self.bottom).contains(&row) && (self.left..=self.right).contains(&col)
    }

    pub fn overlaps(&self, other: &MergedRegion) -> bool {
        self.top <= other.bottom
            && other.top <= self.bottom
            && self.left <= other.right
            && other.left <= self.right
    }

    pub fn intersects_rows(&self, first: usize, last: usize) -> bool {
        self.top <= last && first <= self.bottom
    }
}

/// Dense row-major cell storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<CellValue>,
}

impl CellGrid {
    /// Builds a grid from ragged rows, padding short rows and trimming
    /// trailing empty rows and columns.
    pub fn from_rows(rows: Vec<Vec<CellValue>>) -> Self {
        let n_cols_raw = rows.iter().map(Vec::len).max().unwrap_or(0);
        let n_rows = rows
            .iter()
            .rposition(|r| r.iter().any(|c| !c.is_empty()))
            .map_or(0, |i| i + 1);
        let n_cols = rows[..n_rows]
            .iter()
            .filter_map(|r| r.iter().rposition(|c| !c.is_empty()))
            .max()
            .map_or(0, |i| i + 1)
            .min(n_cols_raw);
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for row in rows.into_iter().take(n_rows) {
            let len = row.len();
            cells.extend(row.into_iter().take(n_cols));
            for _ in len.min(n_cols)..n_cols {
                cells.push(CellValue::empty());
            }
        }
        CellGrid { n_rows, n_cols, cells }
    }

    /// Convenience for tests and fixtures: every string is classified with
    /// [`CellValue::from_text`].
    pub fn from_text_rows<S: AsRef<str>>(rows: &[Vec<S>]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|s| CellValue::from_text(s.as_ref())).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0 || self.n_cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&CellValue> {
        if row < self.n_rows && col < self.n_cols {
            Some(&self.cells[row * self.n_cols + col])
        } else {
            None
        }
    }

    pub fn row(&self, row: usize) -> &[CellValue] {
        &self.cells[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[CellValue]> {
        (0..self.n_rows).map(move |r| self.row(r))
    }

    /// Writes display text as CSV. Loading the output back reproduces the grid.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(out);
        for row in self.rows() {
            w.write_record(row.iter().map(|c| c.text.as_str()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    name: String,
    grid: CellGrid,
    merges: Vec<MergedRegion>,
}

/// Result of [`Sheet::cell_at`]: the effective value and whether it was
/// inherited from a merge anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRef<'a> {
    pub value: &'a CellValue,
    pub merge_filled: bool,
}

impl Sheet {
    /// Checks merge bounds, minimum area and pairwise disjointness.
    pub fn new(
        name: impl Into<String>,
        grid: CellGrid,
        mut merges: Vec<MergedRegion>,
    ) -> Result<Self, GridError> {
        for m in &merges {
            if m.top > m.bottom || m.left > m.right {
                return Err(GridError::InvalidMerge(*m, "inverted corners"));
            }
            if m.area() < 2 {
                return Err(GridError::InvalidMerge(*m, "a merge must span at least 2 cells"));
            }
            if m.bottom >= grid.n_rows || m.right >= grid.n_cols {
                return Err(GridError::InvalidMerge(*m, "outside grid bounds"));
            }
        }
        merges.sort();
        for (i, a) in merges.iter().enumerate() {
            if merges[i + 1..].iter().any(|b| a.overlaps(b)) {
                return Err(GridError::InvalidMerge(*a, "overlaps another merged region"));
            }
        }
        Ok(Sheet { name: name.into(), grid, merges })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn merges(&self) -> &[MergedRegion] {
        &self.merges
    }

    pub fn n_rows(&self) -> usize {
        self.grid.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.grid.n_cols
    }

    pub fn merge_containing(&self, row: usize, col: usize) -> Option<&MergedRegion> {
        self.merges.iter().find(|m| m.contains(row, col))
    }

    /// Merge-expanded cell lookup: non-anchor cells of a merged region report
    /// the anchor's value with `merge_filled = true`.
    pub fn cell_at(&self, row: usize, col: usize) -> Result<CellRef<'_>, GridError> {
        let oob = || GridError::OutOfBounds {
            row,
            col,
            n_rows: self.grid.n_rows,
            n_cols: self.grid.n_cols,
        };
        let own = self.grid.get(row, col).ok_or_else(oob)?;
        match self.merge_containing(row, col) {
            Some(m) if (m.top, m.left) != (row, col) => Ok(CellRef {
                value: self.grid.get(m.top, m.left).ok_or_else(oob)?,
                merge_filled: true,
            }),
            _ => Ok(CellRef { value: own, merge_filled: false }),
        }
    }

    /// Merge-expanded row as display text.
    pub fn expanded_row(&self, row: usize) -> Vec<&str> {
        (0..self.n_cols())
            .map(|c| self.cell_at(row, c).map(|r| r.value.text.as_str()).unwrap_or(""))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workbook {
    source_path: PathBuf,
    sheets: Vec<Sheet>,
}

impl Workbook {
    pub fn new(source_path: impl Into<PathBuf>, sheets: Vec<Sheet>) -> Result<Self, GridError> {
        if sheets.is_empty() {
            return Err(GridError::NoSheets);
        }
        for (i, s) in sheets.iter().enumerate() {
            if sheets[..i].iter().any(|o| o.name == s.name) {
                return Err(GridError::DuplicateSheet(s.name.clone()));
            }
        }
        Ok(Workbook { source_path: source_path.into(), sheets })
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    pub fn into_sheets(self) -> Vec<Sheet> {
        self.sheets
    }
}
