//! Structure-preserving blocks: segmentation at header boundaries, block
//! metadata (header path, year labels, unit), descriptions and the vector index.

mod describe;
mod embed;
mod index;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{CellKind, CellValue, Sheet};
use crate::structure::{is_unit_line, RowSpan, SheetClass, SheetProfile};
use crate::text::{extract_years, is_unit_text, strip_years, unit_of_label, YearLabel};

pub use describe::{describe, describe_with_model, sentence_count, validate_description, BlockDescription};
pub use embed::{cosine, EmbedError, Embedder, EmbeddingVector, HashingEmbedder, HttpEmbedder};
pub use index::{retrieve, IndexEntry, IndexError, IndexRecord, VectorIndex};

/// Default row window for blocks cut from sheets without section labels.
pub const DEFAULT_MAX_BLOCK_ROWS: usize = 40;

/// `<sheet>#<ordinal>`; orders by sheet name, then numerically by ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId {
    pub sheet: String,
    pub ordinal: usize,
}

impl BlockId {
    pub fn new(sheet: impl Into<String>, ordinal: usize) -> Self {
        BlockId { sheet: sheet.into(), ordinal }
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.sheet, self.ordinal)
    }
}

impl FromStr for BlockId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sheet, ord) = s.rsplit_once('#').ok_or_else(|| format!("malformed block id {s:?}"))?;
        let ordinal = ord.parse().map_err(|_| format!("malformed block ordinal in {s:?}"))?;
        Ok(BlockId::new(sheet, ordinal))
    }
}

impl Serialize for BlockId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a block's boundaries were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLayout {
    /// Starts at (or before) a change of the outermost section label.
    Section,
    /// A vertically merged group label in the first column.
    Group,
    /// Fixed row window.
    Window,
}

/// A sheet row rendered with original display text (merge anchors only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedRow {
    pub row: usize,
    pub cells: Vec<String>,
}

impl RenderedRow {
    fn from_sheet(sheet: &Sheet, row: usize) -> Self {
        RenderedRow {
            row,
            cells: sheet.grid().row(row).iter().map(|c| c.text.clone()).collect(),
        }
    }

    /// `r<n>: a | b` with a 1-based sheet row number.
    pub fn render(&self) -> String {
        self.render_tagged('r')
    }

    fn render_tagged(&self, tag: char) -> String {
        format!("{tag}{}: {}", self.row + 1, self.cells.join(" | "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockMetadata {
    pub header_path: Vec<String>,
    pub year_labels: Vec<YearLabel>,
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub block_id: BlockId,
    pub sheet_name: String,
    pub row_range: RowSpan,
    pub layout: BlockLayout,
    pub metadata: BlockMetadata,
    /// Header region rows, attached to every block of the sheet.
    pub header: Vec<RenderedRow>,
    pub rows: Vec<RenderedRow>,
}

impl Block {
    /// Header rows (`h<n>:`) followed by body rows (`r<n>:`), one line per
    /// non-empty sheet row.
    pub fn render(&self) -> String {
        let tagged = self.header.iter().map(|r| ('h', r)).chain(self.rows.iter().map(|r| ('r', r)));
        let mut out = String::new();
        for (tag, r) in tagged {
            if r.cells.iter().all(String::is_empty) {
                continue;
            }
            out.push_str(&r.render_tagged(tag));
            out.push('\n');
        }
        out
    }

    /// Row labels of data rows (first text cell of rows holding a number).
    pub fn content_labels(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            let has_number = r.cells.iter().any(|c| CellValue::from_text(c).kind == CellKind::Number);
            if !has_number {
                continue;
            }
            if let Some(label) = r
                .cells
                .iter()
                .map(|c| c.trim())
                .find(|c| !c.is_empty() && CellValue::from_text(c).kind == CellKind::Text)
            {
                if !labels.contains(&label) {
                    labels.push(label);
                }
            }
        }
        labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    pub max_block_rows: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig { max_block_rows: DEFAULT_MAX_BLOCK_ROWS }
    }
}

fn is_label_row(row: &[CellValue]) -> bool {
    row.iter().any(|c| c.kind == CellKind::Text)
        && row.iter().all(|c| matches!(c.kind, CellKind::Empty | CellKind::Text))
        && !is_unit_line(row)
}

/// Sort key for label rows: wide-merged labels first, then by column, then by indentation.
fn label_rank(sheet: &Sheet, r: usize) -> (u8, usize, usize) {
    let row = sheet.grid().row(r);
    let Some(col) = row.iter().position(|c| !c.is_empty()) else {
        return (u8::MAX, usize::MAX, usize::MAX);
    };
    let wide = sheet
        .merges()
        .iter()
        .any(|m| m.top == r && m.left == col && m.right > m.left);
    let text = &row[col].text;
    let indent = text.len() - text.trim_start().len();
    (u8::from(!wide), col, indent)
}

/// Moves a boundary below any merged region it would cut through.
fn settle_boundary(sheet: &Sheet, mut b: usize) -> usize {
    loop {
        match sheet.merges().iter().find(|m| m.top < b && b <= m.bottom) {
            Some(m) => b = m.bottom + 1,
            None => return b,
        }
    }
}

/// Splits the body rows of a sheet into blocks.
///
/// Multi-Header sheets break where the outermost section label changes: a run
/// of label-only rows whose rank (wide merge, column, indentation) is the
/// minimum over the body. Without section rows, vertically merged group labels
/// in the first column delimit blocks; otherwise, and for Flat sheets, rows are
/// windowed by `max_block_rows`. Boundaries never cut a merged region.
pub fn segment<F>(sheet: &Sheet, profile: &SheetProfile<F>, config: SegmentConfig) -> Vec<Block> {
    let header = profile.header_rows;
    let n_rows = sheet.n_rows();
    let header_rows: Vec<RenderedRow> =
        header.iter().map(|r| RenderedRow::from_sheet(sheet, r)).collect();
    let body_first = header.last + 1;
    if n_rows == 0 {
        return Vec::new();
    }
    if body_first >= n_rows {
        let mut b = make_block(sheet, 0, header, BlockLayout::Window, &header_rows);
        b.rows.clear();
        return vec![b];
    }

    let (starts, layout) = match profile.sheet_class {
        SheetClass::MultiHeader => {
            let section = section_starts(sheet, body_first);
            if !section.is_empty() {
                (section, BlockLayout::Section)
            } else if let Some(groups) = group_starts(sheet, body_first) {
                (groups, BlockLayout::Group)
            } else {
                (window_starts(body_first, n_rows, config.max_block_rows), BlockLayout::Window)
            }
        }
        SheetClass::Flat => (window_starts(body_first, n_rows, config.max_block_rows), BlockLayout::Window),
    };

    let mut bounds: Vec<usize> = vec![body_first];
    for s in starts {
        let s = settle_boundary(sheet, s);
        if s > *bounds.last().unwrap() && s < n_rows {
            bounds.push(s);
        }
    }
    bounds.push(n_rows);
    bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| make_block(sheet, i, RowSpan::new(w[0], w[1] - 1), layout, &header_rows))
        .collect()
}

fn section_starts(sheet: &Sheet, body_first: usize) -> Vec<usize> {
    let grid = sheet.grid();
    let labels: Vec<usize> = (body_first..grid.n_rows())
        .filter(|&r| is_label_row(grid.row(r)))
        .collect();
    let Some(min_rank) = labels.iter().map(|&r| label_rank(sheet, r)).min() else {
        return Vec::new();
    };
    let mut starts = Vec::new();
    for &r in &labels {
        if label_rank(sheet, r) != min_rank {
            continue;
        }
        // a run of consecutive label rows starts one block
        let mut s = r;
        while s > body_first && is_label_row(grid.row(s - 1)) && label_rank(sheet, s - 1) == min_rank {
            s -= 1;
        }
        if starts.last() != Some(&s) {
            starts.push(s);
        }
    }
    starts
}

fn group_starts(sheet: &Sheet, body_first: usize) -> Option<Vec<usize>> {
    let vertical: Vec<_> = sheet
        .merges()
        .iter()
        .filter(|m| m.left == 0 && m.top >= body_first && m.bottom > m.top)
        .collect();
    if vertical.is_empty() {
        return None;
    }
    let mut starts = vec![body_first];
    let mut prev = sheet.cell_at(body_first, 0).ok()?.value.text.clone();
    for r in body_first + 1..sheet.n_rows() {
        let cur = &sheet.cell_at(r, 0).ok()?.value.text;
        if cur != &prev && !cur.is_empty() {
            starts.push(r);
            prev = cur.clone();
        }
    }
    Some(starts)
}

fn window_starts(body_first: usize, n_rows: usize, max_rows: usize) -> Vec<usize> {
    (body_first..n_rows).step_by(max_rows.max(1)).collect()
}

fn make_block(
    sheet: &Sheet,
    ordinal: usize,
    range: RowSpan,
    layout: BlockLayout,
    header_rows: &[RenderedRow],
) -> Block {
    Block {
        block_id: BlockId::new(sheet.name(), ordinal),
        sheet_name: sheet.name().to_string(),
        row_range: range,
        layout,
        metadata: BlockMetadata::default(),
        header: header_rows.to_vec(),
        rows: range.iter().map(|r| RenderedRow::from_sheet(sheet, r)).collect(),
    }
}

fn push_unique(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() && !out.iter().any(|o| o == s) {
        out.push(s.to_string());
    }
}

/// True when nothing but year tokens (and FY/CY prefixes) remains.
fn is_year_only(text: &str) -> bool {
    !extract_years(text).is_empty() && crate::text::words(&strip_years(text)).is_empty()
}

fn header_labels(sheet: &Sheet, header: RowSpan) -> Vec<String> {
    let mut out = Vec::new();
    for r in header.iter() {
        for c in sheet.grid().row(r) {
            if c.kind == CellKind::Text && !is_unit_text(&c.text) && !is_year_only(&c.text) {
                push_unique(&mut out, &c.text);
            }
        }
    }
    out
}

fn label_text(row: &[CellValue]) -> Option<&str> {
    row.iter().find(|c| c.kind == CellKind::Text).map(|c| c.text.as_str())
}

/// Header path, year labels and unit for one block.
///
/// The header path lists the header-region labels (for the first section, or
/// when every block opens with its own section label) followed by the label
/// rows inside the block, de-duplicated, outer to inner. Years come from the
/// header region and the block's cells; numeric cells only count in columns
/// whose body is made of integer years. The unit is the first unit-lexicon hit
/// in the header region.
pub fn extract_metadata<F>(block: &Block, sheet: &Sheet, profile: &SheetProfile<F>) -> BlockMetadata {
    let header = profile.header_rows;
    let grid = sheet.grid();
    let body_first = header.last + 1;
    let mut path = Vec::new();

    let block_label_rows: Vec<usize> = block
        .row_range
        .iter()
        .filter(|&r| r >= body_first && is_label_row(grid.row(r)))
        .collect();
    let opens_with_label = block_label_rows.first() == Some(&block.row_range.first);
    let first_opens_with_label = body_first < grid.n_rows() && is_label_row(grid.row(body_first));
    let include_header = match block.layout {
        BlockLayout::Section => (block.block_id.ordinal == 0 && !opens_with_label) || first_opens_with_label,
        _ => true,
    };
    if include_header {
        for l in header_labels(sheet, header) {
            push_unique(&mut path, &l);
        }
    }
    if block.layout == BlockLayout::Group {
        if let Ok(c) = sheet.cell_at(block.row_range.first, 0) {
            if c.value.kind == CellKind::Text {
                push_unique(&mut path, &c.value.text);
            }
        }
    }
    for r in block_label_rows {
        if let Some(t) = label_text(grid.row(r)) {
            push_unique(&mut path, t);
        }
    }

    let year_cols = year_columns(sheet, body_first);
    let mut years: Vec<YearLabel> = Vec::new();
    let mut add_years = |ys: Vec<YearLabel>| {
        for y in ys {
            match years.iter_mut().find(|e| e.year == y.year) {
                Some(e) => e.fiscal |= y.fiscal,
                None => years.push(y),
            }
        }
    };
    for r in header.iter().chain(block.row_range.iter().filter(|&r| r >= body_first)) {
        for (c, cell) in grid.row(r).iter().enumerate() {
            match cell.kind {
                CellKind::Text | CellKind::Date => add_years(extract_years(&cell.text)),
                CellKind::Number
                    if (year_cols[c] || header.contains(r)) && cell.number.is_some_and(|v| v.fract() == 0.0) =>
                {
                    add_years(extract_years(&cell.text))
                }
                _ => {}
            }
        }
    }
    years.sort();

    let unit = header
        .iter()
        .flat_map(|r| grid.row(r).iter())
        .filter(|c| c.kind == CellKind::Text)
        .find_map(|c| unit_of_label(&c.text));

    BlockMetadata { header_path: path, year_labels: years, unit }
}

/// Columns whose numeric body cells are all integer years.
fn year_columns(sheet: &Sheet, body_first: usize) -> Vec<bool> {
    let grid = sheet.grid();
    (0..grid.n_cols())
        .map(|c| {
            let mut seen = false;
            for r in body_first..grid.n_rows() {
                let cell = &grid.row(r)[c];
                if cell.kind == CellKind::Number {
                    let v = cell.number.unwrap_or(f64::NAN);
                    if !(v.fract() == 0.0 && (1900.0..=2100.0).contains(&v)) {
                        return false;
                    }
                    seen = true;
                }
            }
            seen
        })
        .collect()
}

/// Segments a sheet and attaches metadata to every block.
pub fn build_blocks<F>(sheet: &Sheet, profile: &SheetProfile<F>, config: SegmentConfig) -> Vec<Block> {
    let mut blocks = segment(sheet, profile, config);
    for b in &mut blocks {
        b.metadata = extract_metadata(b, sheet, profile);
    }
    blocks
}
