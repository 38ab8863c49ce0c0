//! Header detection, complexity scoring and Flat / Multi-Header classification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellKind, CellValue, Sheet};
use crate::scalar::Scalar;
use crate::text::{extract_years, is_unit_text};

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("sheet {0:?} has no cells")]
    EmptySheet(String),
    #[error("invalid complexity config: {0}")]
    InvalidConfig(&'static str),
}

/// Weights and thresholds for the complexity score and the class rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "F: Scalar"))]
pub struct ComplexityConfig<F> {
    pub alpha: F,
    pub beta: F,
    /// Merge-density cutoff; sheets with `d >= rho` are Multi-Header.
    pub rho: F,
    pub max_header_scan_rows: usize,
}

impl<F: Scalar> Default for ComplexityConfig<F> {
    fn default() -> Self {
        ComplexityConfig {
            alpha: F::lit(0.6),
            beta: F::lit(0.4),
            rho: F::lit(0.12),
            max_header_scan_rows: 10,
        }
    }
}

impl<F: Scalar> ComplexityConfig<F> {
    pub fn validate(&self) -> Result<(), StructureError> {
        if !(self.alpha > F::zero() && self.beta > F::zero()) {
            return Err(StructureError::InvalidConfig("alpha and beta must be positive"));
        }
        if !(self.rho > F::zero() && self.rho < F::one()) {
            return Err(StructureError::InvalidConfig("rho must lie in (0, 1)"));
        }
        if self.max_header_scan_rows == 0 {
            return Err(StructureError::InvalidConfig("max_header_scan_rows must be at least 1"));
        }
        Ok(())
    }

    /// `alpha * H + beta * M`, evaluated without intermediate rounding.
    pub fn complexity(&self, header_depth: usize, merge_count: usize) -> F {
        self.alpha * F::from_count(header_depth) + self.beta * F::from_count(merge_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SheetClass {
    Flat,
    MultiHeader,
}

/// Inclusive row interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct RowSpan {
    pub first: usize,
    pub last: usize,
}

impl RowSpan {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        RowSpan { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, row: usize) -> bool {
        (self.first..=self.last).contains(&row)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

impl From<[usize; 2]> for RowSpan {
    fn from(v: [usize; 2]) -> Self {
        RowSpan { first: v[0], last: v[1] }
    }
}

impl From<RowSpan> for [usize; 2] {
    fn from(s: RowSpan) -> Self {
        [s.first, s.last]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct SheetProfile<F> {
    pub header_depth: usize,
    pub header_merge_count: usize,
    pub header_span: usize,
    pub merge_density: F,
    pub complexity: F,
    pub sheet_class: SheetClass,
    pub header_rows: RowSpan,
}

impl<F> SheetProfile<F> {
    pub fn is_flat(&self) -> bool {
        self.sheet_class == SheetClass::Flat
    }
}

/// Multi-Header iff the header is at least two rows deep or merge density
/// reaches `rho` (inclusive).
pub fn classify<F: Scalar>(header_depth: usize, merge_density: F, config: &ComplexityConfig<F>) -> SheetClass {
    if header_depth >= 2 || merge_density >= config.rho {
        SheetClass::MultiHeader
    } else {
        SheetClass::Flat
    }
}

/// A row made only of unit annotations such as "USD (millions)".
pub fn is_unit_line(row: &[CellValue]) -> bool {
    let mut any = false;
    for c in row {
        match c.kind {
            CellKind::Empty => {}
            CellKind::Text if is_unit_text(&c.text) => any = true,
            _ => return false,
        }
    }
    any
}

/// Row whose numbers are all distinct year labels, at least two of them
/// (e.g. `2020 | 2021 | 2022` above a balance sheet's value columns).
fn is_year_label_row(row: &[CellValue]) -> bool {
    let mut years = Vec::new();
    for c in row.iter().filter(|c| c.kind == CellKind::Number) {
        match c.number {
            Some(v) if v.fract() == 0.0 && (1900.0..=2100.0).contains(&v) && extract_years(&c.text).len() == 1 => {
                years.push(v as i64)
            }
            _ => return false,
        }
    }
    let n = years.len();
    years.sort_unstable();
    years.dedup();
    n >= 2 && years.len() == n
}

fn has_value_number(row: &[CellValue]) -> bool {
    row.iter().any(|c| c.kind == CellKind::Number) && !is_year_label_row(row)
}

/// Columns whose body is mostly numeric. The body is estimated as every row
/// from the first row carrying a non-label number.
fn numeric_columns(sheet: &Sheet) -> Vec<bool> {
    let grid = sheet.grid();
    let Some(start) = (0..grid.n_rows()).find(|&r| has_value_number(grid.row(r))) else {
        return vec![false; grid.n_cols()];
    };
    (0..grid.n_cols())
        .map(|c| {
            let (mut num, mut other) = (0usize, 0usize);
            for r in start..grid.n_rows() {
                match grid.row(r)[c].kind {
                    CellKind::Number => num += 1,
                    CellKind::Empty => {}
                    _ => other += 1,
                }
            }
            num > 0 && num >= other
        })
        .collect()
}

/// Contiguous header prefix. Row 0 always belongs to it; row `r` extends it
/// while it carries no body-style number, continues a vertical merge from the
/// rows above, or is a unit line. At least one body row is left when the
/// sheet has two or more rows.
pub fn detect_header_region<F: Scalar>(
    sheet: &Sheet,
    config: &ComplexityConfig<F>,
) -> Result<RowSpan, StructureError> {
    let grid = sheet.grid();
    if grid.is_empty() {
        return Err(StructureError::EmptySheet(sheet.name().to_string()));
    }
    let numeric = numeric_columns(sheet);
    let any_numeric = numeric.iter().any(|&b| b);
    let limit = config.max_header_scan_rows.max(1).min(grid.n_rows().saturating_sub(1).max(1));
    let mut last = 0;
    for r in 1..limit {
        let row = grid.row(r);
        let no_body_number = any_numeric
            && !row
                .iter()
                .zip(&numeric)
                .any(|(c, &is_num)| is_num && c.kind == CellKind::Number && !is_year_label_row(row));
        let continues_merge = sheet
            .merges()
            .iter()
            .any(|m| m.top <= last && m.bottom >= r);
        if no_body_number || continues_merge || is_unit_line(row) {
            last = r;
        } else {
            break;
        }
    }
    Ok(RowSpan::new(0, last))
}

pub fn compute_profile<F: Scalar>(
    sheet: &Sheet,
    config: &ComplexityConfig<F>,
) -> Result<SheetProfile<F>, StructureError> {
    let header = detect_header_region(sheet, config)?;
    let header_depth = header.len();
    let header_merge_count = sheet
        .merges()
        .iter()
        .filter(|m| m.intersects_rows(header.first, header.last))
        .count();
    let header_span = header_depth * sheet.n_cols();
    let merge_density = if header_span > 0 {
        F::from_count(header_merge_count) / F::from_count(header_span)
    } else {
        F::zero()
    };
    Ok(SheetProfile {
        header_depth,
        header_merge_count,
        header_span,
        merge_density,
        complexity: config.complexity(header_depth, header_merge_count),
        sheet_class: classify(header_depth, merge_density, config),
        header_rows: header,
    })
}
