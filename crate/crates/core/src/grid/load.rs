use std::fs;
use std::path::Path;

use calamine::{open_workbook, Data, Reader, Xlsx};

use super::{iso_datetime, CellGrid, CellKind, CellValue, GridError, MergedRegion, Sheet, Workbook};

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Field delimiter for delimited text.
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { delimiter: b',' }
    }
}

pub fn load_workbook(path: impl AsRef<Path>) -> Result<Workbook, GridError> {
    load_workbook_with(path, LoadOptions::default())
}

/// Loads `.xlsx`/`.xlsm` through calamine and `.csv`/`.tsv`/`.txt` as delimited
/// text. Hidden rows and columns are loaded like any other.
pub fn load_workbook_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Workbook, GridError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(GridError::FileNotFound(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "csv" | "txt" => load_delimited(path, opts.delimiter),
        "tsv" => load_delimited(path, if opts.delimiter == b',' { b'\t' } else { opts.delimiter }),
        "xlsx" | "xlsm" => load_xlsx(path),
        other => Err(GridError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: if other.is_empty() {
                "missing file extension".into()
            } else {
                format!("extension .{other} is not a spreadsheet or delimited-text format")
            },
        }),
    }
}

fn load_delimited(path: &Path, delimiter: u8) -> Result<Workbook, GridError> {
    let bytes = fs::read(path).map_err(|e| parse_err(path, None, e.to_string()))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(parse_err(path, None, "file is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let row = e.position().map(|p| p.record() as usize).unwrap_or(i);
            parse_err(path, Some(row), e.to_string())
        })?;
        rows.push(rec.iter().map(CellValue::from_text).collect::<Vec<_>>());
    }
    let grid = CellGrid::from_rows(rows);
    if grid.is_empty() {
        return Err(parse_err(path, None, "no non-empty cells".into()));
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("Sheet1")
        .to_string();
    Workbook::new(path, vec![Sheet::new(name, grid, Vec::new())?])
}

fn load_xlsx(path: &Path) -> Result<Workbook, GridError> {
    let mut book: Xlsx<_> =
        open_workbook(path).map_err(|e: calamine::XlsxError| parse_err(path, None, e.to_string()))?;
    let mut sheets = Vec::new();
    for name in book.sheet_names() {
        let range = book
            .worksheet_range(&name)
            .map_err(|e| parse_err(path, None, format!("sheet {name:?}: {e}")))?;
        let merges = book
            .merge_cells_by_sheet_name(&name)
            .map_err(|e| parse_err(path, None, format!("sheet {name:?}: {e}")))?;

        let (row0, col0) = range.start().map_or((0, 0), |(r, c)| (r as usize, c as usize));
        let (height, width) = range.get_size();
        let mut rows = vec![vec![CellValue::empty(); col0 + width]; row0 + height];
        for (r, c, data) in range.cells() {
            rows[row0 + r][col0 + c] = convert(data);
        }
        let grid = CellGrid::from_rows(rows);
        let regions = merges
            .iter()
            .filter_map(|d| {
                let (top, left) = (d.start.0 as usize, d.start.1 as usize);
                let bottom = (d.end.0 as usize).min(grid.n_rows().checked_sub(1)?);
                let right = (d.end.1 as usize).min(grid.n_cols().checked_sub(1)?);
                (top <= bottom && left <= right)
                    .then(|| MergedRegion::new(top, left, bottom, right))
                    .filter(|m| m.area() >= 2)
            })
            .collect();
        sheets.push(Sheet::new(name, grid, regions)?);
    }
    if sheets.iter().all(|s| s.grid().is_empty()) {
        return Err(parse_err(path, None, "workbook contains no non-empty cells".into()));
    }
    Workbook::new(path, sheets)
}

fn convert(data: &Data) -> CellValue {
    match data {
        Data::Empty => CellValue::empty(),
        Data::String(s) => CellValue {
            kind: if s.is_empty() { CellKind::Empty } else { CellKind::Text },
            text: s.clone(),
            number: None,
            iso_date: None,
        },
        Data::Int(i) => CellValue::number(*i as f64),
        Data::Float(f) => CellValue::number(*f),
        Data::Bool(b) => CellValue {
            kind: CellKind::Boolean,
            text: if *b { "TRUE".into() } else { "FALSE".into() },
            number: None,
            iso_date: None,
        },
        Data::DateTime(dt) => match dt.as_datetime() {
            Some(ndt) => {
                let iso = iso_datetime(ndt);
                CellValue {
                    kind: CellKind::Date,
                    text: iso.clone(),
                    number: None,
                    iso_date: Some(iso),
                }
            }
            None => CellValue::number(dt.as_f64()),
        },
        Data::DateTimeIso(s) => CellValue::from_text(s),
        Data::DurationIso(s) => CellValue {
            kind: CellKind::Text,
            text: s.clone(),
            number: None,
            iso_date: None,
        },
        Data::Error(e) => CellValue {
            kind: CellKind::Text,
            text: e.to_string(),
            number: None,
            iso_date: None,
        },
    }
}

fn parse_err(path: &Path, row: Option<usize>, message: String) -> GridError {
    GridError::ParseError {
        path: path.to_path_buf(),
        row,
        col: None,
        message,
    }
}
