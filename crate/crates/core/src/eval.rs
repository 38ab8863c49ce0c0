//! Dataset runner, exact-match scoring and retrieval recall.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Ablation, AnswerStatus, Engine, EngineConfig, EngineError, SheetIndex};
use crate::grid::{load_workbook, GridError, Workbook};
use crate::llm::{Gateway, InvocationBudget};
use crate::scalar::Scalar;

/// Prefix marking a gold evidence unit as a SQL result signature.
pub const SQL_EVIDENCE_PREFIX: &str = "sql:";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold evidence set is empty")]
    EmptyGold,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("dataset line {line}: {message}")]
    DatasetParse { line: usize, message: String },
    #[error("missing workbook {0}")]
    MissingWorkbook(PathBuf),
    #[error("workbook {file} has no sheet {sheet:?}")]
    MissingSheet { file: PathBuf, sheet: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
    #[default]
    Na,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRef {
    /// Workbook path, relative to the dataset file unless absolute.
    pub file: PathBuf,
    pub sheet: String,
}

/// One line of a JSONL dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    /// Block ids (`Sheet#0`) and/or `sql:<result signature>` entries.
    #[serde(default)]
    pub gold_evidence: Vec<String>,
    #[serde(default)]
    pub tier: Tier,
    pub sheet_ref: SheetRef,
}

static THOUSANDS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d),(\d{3})").unwrap());
static DECIMAL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([+-]?)(\d*)(?:\.(\d*))?$").unwrap());

fn normalize(s: &str) -> String {
    let mut t = s.trim().to_lowercase();
    while THOUSANDS_RE.is_match(&t) {
        t = THOUSANDS_RE.replace_all(&t, "$1$2").into_owned();
    }
    let t = t.strip_suffix('%').unwrap_or(&t).trim_end();
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical decimal text: no sign on zero, no leading or trailing zeros.
fn canonical_decimal(s: &str) -> Option<String> {
    let caps = DECIMAL_RE.captures(s)?;
    let int = caps[2].trim_start_matches('0');
    let frac = caps.get(3).map_or("", |m| m.as_str()).trim_end_matches('0');
    if caps[2].is_empty() && caps.get(3).is_none_or(|m| m.as_str().is_empty()) {
        return None;
    }
    let body = match (int.is_empty(), frac.is_empty()) {
        (true, true) => return Some("0".into()),
        (_, true) => int.to_string(),
        (true, false) => format!("0.{frac}"),
        (false, false) => format!("{int}.{frac}"),
    };
    Some(if &caps[1] == "-" { format!("-{body}") } else { body })
}

/// Exact match after trimming, case folding, removing thousands separators
/// and a trailing `%`, and collapsing whitespace. Numbers compare as exact
/// decimals; unit words are never converted.
pub fn exact_match(predicted: &str, gold: &str) -> bool {
    let (p, g) = (normalize(predicted), normalize(gold));
    match (canonical_decimal(&p), canonical_decimal(&g)) {
        (Some(a), Some(b)) => a == b,
        _ => p == g,
    }
}

/// `|first k retrieved ∩ gold| / |gold|`.
pub fn recall_at_k<T: Ord>(retrieved: &[T], gold: &[T], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let gold: BTreeSet<&T> = gold.iter().collect();
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let top: BTreeSet<&T> = retrieved.iter().take(k).collect();
    Ok(top.intersection(&gold).count() as f64 / gold.len() as f64)
}

pub fn read_dataset(path: &Path) -> Result<Vec<QaRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QaRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::DatasetParse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub id: String,
    pub tier: Tier,
    pub status: AnswerStatus,
    pub predicted: Option<String>,
    pub gold: String,
    #[serde(rename = "match")]
    pub matched: bool,
    pub s_ctx: Option<f64>,
    pub path: Vec<String>,
    pub budget: InvocationBudget,
    pub recall_chunk_at_3: Option<f64>,
    pub recall_sql_at_1: Option<f64>,
    pub recall_merged_at_3: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub n: usize,
    pub matches: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ablation: Ablation,
    pub n_total: usize,
    pub n_answered: usize,
    pub n_abstained: usize,
    pub exact_match_accuracy: f64,
    /// Means over records with gold evidence of the matching kind; `None` when there are none.
    pub recall_chunk_at_3: Option<f64>,
    pub recall_sql_at_1: Option<f64>,
    pub recall_merged_at_3: Option<f64>,
    pub per_tier: BTreeMap<Tier, TierStats>,
    pub queries: Vec<QueryRow>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl EvalReport {
    fn from_rows(ablation: Ablation, queries: Vec<QueryRow>) -> Self {
        let n_total = queries.len();
        let n_answered = queries.iter().filter(|q| q.status == AnswerStatus::Answered).count();
        let matches = queries.iter().filter(|q| q.matched).count();
        let mut per_tier: BTreeMap<Tier, TierStats> = BTreeMap::new();
        for q in &queries {
            let t = per_tier.entry(q.tier).or_default();
            t.n += 1;
            t.matches += usize::from(q.matched);
        }
        for t in per_tier.values_mut() {
            t.accuracy = t.matches as f64 / t.n as f64;
        }
        EvalReport {
            ablation,
            n_total,
            n_answered,
            n_abstained: n_total - n_answered,
            exact_match_accuracy: if n_total == 0 { 0.0 } else { matches as f64 / n_total as f64 },
            recall_chunk_at_3: mean(queries.iter().map(|q| q.recall_chunk_at_3)),
            recall_sql_at_1: mean(queries.iter().map(|q| q.recall_sql_at_1)),
            recall_merged_at_3: mean(queries.iter().map(|q| q.recall_merged_at_3)),
            per_tier,
            queries,
        }
    }

    /// Plain-text summary table.
    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
        let mut s = String::new();
        let _ = writeln!(s, "ablation: {}", self.ablation.title());
        let _ = writeln!(
            s,
            "queries: {}  answered: {}  abstained: {}",
            self.n_total, self.n_answered, self.n_abstained
        );
        let _ = writeln!(s, "exact match: {}", pct(Some(self.exact_match_accuracy)));
        let _ = writeln!(
            s,
            "R@3 chunk: {}  R@1 sql: {}  R@3 merged: {}",
            pct(self.recall_chunk_at_3),
            pct(self.recall_sql_at_1),
            pct(self.recall_merged_at_3)
        );
        for (tier, t) in &self.per_tier {
            let name = serde_json::to_value(tier).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let _ = writeln!(s, "  {name:<6} {:>3}/{:<3} {}", t.matches, t.n, pct(Some(t.accuracy)));
        }
        s
    }
}

/// Ablation table: one row per report, in the given order.
pub fn ablation_table(reports: &[EvalReport]) -> String {
    let mut s = format!("{:<12} {:>9} {:>9} {:>9}\n", "variant", "accuracy", "answered", "abstained");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<12} {:>8.1}% {:>9} {:>9}",
            r.ablation.title(),
            100.0 * r.exact_match_accuracy,
            r.n_answered,
            r.n_abstained
        );
    }
    s
}

fn resolve(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

/// Loaded workbooks for a dataset; every referenced file must exist.
pub struct DatasetWorkbooks {
    base: PathBuf,
    books: HashMap<PathBuf, Workbook>,
}

impl DatasetWorkbooks {
    pub fn load(dataset_path: &Path, records: &[QaRecord]) -> Result<Self, EvalError> {
        let base = dataset_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let files: BTreeSet<PathBuf> = records.iter().map(|r| resolve(&base, &r.sheet_ref.file)).collect();
        if let Some(missing) = files.iter().find(|f| !f.is_file()) {
            return Err(EvalError::MissingWorkbook(missing.clone()));
        }
        let mut books = HashMap::new();
        for f in files {
            let wb = load_workbook(&f)?;
            books.insert(f, wb);
        }
        Ok(DatasetWorkbooks { base, books })
    }
}

type IndexKey = (PathBuf, String);

fn build_indexes<F: Scalar>(
    engine: &Engine<F>,
    books: &DatasetWorkbooks,
    records: &[QaRecord],
) -> Result<HashMap<IndexKey, SheetIndex<F>>, EvalError> {
    let keys: BTreeSet<IndexKey> =
        records.iter().map(|r| (resolve(&books.base, &r.sheet_ref.file), r.sheet_ref.sheet.clone())).collect();
    let mut out = HashMap::new();
    for (file, sheet) in keys {
        let wb = &books.books[&file];
        let s = wb.sheet(&sheet).ok_or_else(|| EvalError::MissingSheet { file: file.clone(), sheet: sheet.clone() })?;
        let idx = engine.index_sheet(s)?;
        out.insert((file, sheet), idx);
    }
    Ok(out)
}

fn evaluate_record<F: Scalar>(engine: &Engine<F>, index: &SheetIndex<F>, rec: &QaRecord) -> Result<QueryRow, EvalError> {
    let answer = engine.run_query(index, &rec.question)?;
    let matched = answer.status == AnswerStatus::Answered
        && answer.answer.as_deref().is_some_and(|a| exact_match(a, &rec.gold_answer));

    let (sql_gold, block_gold): (Vec<String>, Vec<String>) =
        rec.gold_evidence.iter().cloned().partition(|g| g.starts_with(SQL_EVIDENCE_PREFIX));
    let ranked: Vec<String> = if block_gold.is_empty() {
        Vec::new()
    } else {
        engine.retrieve(index, &rec.question)?.into_iter().map(|(id, _)| id.to_string()).collect()
    };
    let recall_chunk = if block_gold.is_empty() { None } else { Some(recall_at_k(&ranked, &block_gold, 3)?) };
    let sql_unit = if sql_gold.is_empty() && rec.gold_evidence.is_empty() {
        None
    } else {
        engine.probe_sql(index, &rec.question)?.map(|(_, rows)| format!("{SQL_EVIDENCE_PREFIX}{}", rows.signature()))
    };
    let recall_sql = if sql_gold.is_empty() {
        None
    } else {
        Some(recall_at_k(sql_unit.as_slice(), &sql_gold, 1)?)
    };
    let recall_merged = if rec.gold_evidence.is_empty() {
        None
    } else {
        let mut units: Vec<String> = if ranked.is_empty() {
            engine.retrieve(index, &rec.question)?.into_iter().map(|(id, _)| id.to_string()).collect()
        } else {
            ranked.clone()
        };
        units.truncate(3);
        units.extend(sql_unit.clone());
        Some(recall_at_k(&units, &rec.gold_evidence, units.len().max(1))?)
    };

    Ok(QueryRow {
        id: rec.id.clone(),
        tier: rec.tier,
        status: answer.status,
        predicted: answer.answer.clone(),
        gold: rec.gold_answer.clone(),
        matched,
        s_ctx: answer.confidence.and_then(|c| c.to_f64()),
        path: answer.path_labels(),
        budget: answer.budget,
        recall_chunk_at_3: recall_chunk,
        recall_sql_at_1: recall_sql,
        recall_merged_at_3: recall_merged,
    })
}

/// Runs every record under `config` and aggregates the report. Records run
/// in parallel; rows are ordered by id.
pub fn run_eval<F: Scalar>(
    dataset_path: &Path,
    config: &EngineConfig<F>,
    gateway: Arc<Gateway>,
) -> Result<EvalReport, EvalError> {
    let records = read_dataset(dataset_path)?;
    let books = DatasetWorkbooks::load(dataset_path, &records)?;
    run_records(&records, &books, config, gateway)
}

pub fn run_records<F: Scalar>(
    records: &[QaRecord],
    books: &DatasetWorkbooks,
    config: &EngineConfig<F>,
    gateway: Arc<Gateway>,
) -> Result<EvalReport, EvalError> {
    let engine = Engine::new(config.clone(), gateway)?;
    let indexes = build_indexes(&engine, books, records)?;
    let mut rows = records
        .par_iter()
        .map(|rec| {
            let key = (resolve(&books.base, &rec.sheet_ref.file), rec.sheet_ref.sheet.clone());
            evaluate_record(&engine, &indexes[&key], rec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(EvalReport::from_rows(config.ablation, rows))
}

/// One report per ablation, in `Ablation::ALL` order.
pub fn run_eval_all<F: Scalar>(
    dataset_path: &Path,
    config: &EngineConfig<F>,
    gateway: Arc<Gateway>,
) -> Result<Vec<EvalReport>, EvalError> {
    let records = read_dataset(dataset_path)?;
    let books = DatasetWorkbooks::load(dataset_path, &records)?;
    Ablation::ALL
        .into_iter()
        .map(|a| {
            let cfg = EngineConfig { ablation: a, ..config.clone() };
            run_records(&records, &books, &cfg, gateway.clone())
        })
        .collect()
}
