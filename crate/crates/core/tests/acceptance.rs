//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p sheetqa-core --test acceptance -- --nocapture` to see
//! the lines.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sheetqa_core::chunk::{EmbedError, Embedder, EmbeddingVector};
use sheetqa_core::engine::{Ablation, Answer, AnswerStatus, Backend, Engine, EngineConfig, EvidenceOrigin};
use sheetqa_core::eval::{exact_match, recall_at_k, run_eval_all, EvalError};
use sheetqa_core::grid::{CellGrid, MergedRegion, Sheet};
use sheetqa_core::llm::{Gateway, MockBackend, Purpose};
use sheetqa_core::sql::{
    execute, parse_sql, validate, ColumnSchema, ColumnType, RelationalTable, SqlError, SqlValue, TableRow,
};
use sheetqa_core::structure::{compute_profile, ComplexityConfig, SheetClass};

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------------------
// Sheet builders

/// `h` text header rows over `body` numeric rows; `m` horizontal two-cell
/// merges spread round-robin across the header rows.
fn header_sheet(name: &str, h: usize, n_cols: usize, m: usize, body: usize) -> Sheet {
    assert!(2 * m.div_ceil(h) <= n_cols, "not enough columns for {m} merges");
    let merges: Vec<MergedRegion> = (0..m)
        .map(|j| {
            let (row, pair) = (j % h, j / h);
            MergedRegion::new(row, 2 * pair, row, 2 * pair + 1)
        })
        .collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for r in 0..h {
        rows.push(
            (0..n_cols)
                .map(|c| {
                    let covered = merges.iter().any(|g| g.contains(r, c) && (g.top, g.left) != (r, c));
                    if covered { String::new() } else { format!("h{r}c{c}") }
                })
                .collect(),
        );
    }
    for i in 0..body {
        let mut row = vec![format!("item {i}")];
        row.extend((1..n_cols).map(|c| format!("{}", (i * 7 + c * 3) % 50)));
        rows.push(row);
    }
    Sheet::new(name, CellGrid::from_text_rows(&rows), merges).unwrap()
}

/// Financial-statement style sheet: grouped year header, unit line, sections.
fn statement_sheet(name: &str, seed: u64) -> Sheet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first_year = 2015 + (seed % 5) as usize;
    let n_years = rng.random_range(2..=4);
    let n_cols = 1 + n_years;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut top = vec!["Line item".to_string(), "Fiscal year".to_string()];
    top.resize(n_cols, String::new());
    rows.push(top);
    let mut years = vec![String::new()];
    years.extend((0..n_years).map(|k| format!("FY{}", first_year + k)));
    rows.push(years);
    let mut unit = vec![String::new(), "(USD million)".to_string()];
    unit.resize(n_cols, String::new());
    rows.push(unit);
    let sections = [("Revenue", ["Product sales", "Services", "Licensing"]), ("Expenses", ["Staff", "Rent", "Marketing"])];
    for (section, items) in sections {
        let mut s = vec![section.to_string()];
        s.resize(n_cols, String::new());
        rows.push(s);
        for item in items {
            let mut r = vec![format!("  {item}")];
            r.extend((0..n_years).map(|_| format!("{}", rng.random_range(10..900))));
            rows.push(r);
        }
    }
    let merges = vec![MergedRegion::new(0, 1, 0, n_cols - 1), MergedRegion::new(2, 1, 2, n_cols - 1)];
    Sheet::new(name, CellGrid::from_text_rows(&rows), merges).unwrap()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_classification_suite() {
    let cfg = ComplexityConfig::<f64>::default();
    // (H, n_cols, M, expected); d = M / (H * n_cols).
    let corpus: [(usize, usize, usize, SheetClass); 20] = [
        (1, 3, 0, SheetClass::Flat),
        (1, 5, 0, SheetClass::Flat),
        (1, 8, 0, SheetClass::Flat),
        (1, 12, 0, SheetClass::Flat),
        (1, 10, 1, SheetClass::Flat),
        (1, 9, 1, SheetClass::Flat),
        (1, 17, 2, SheetClass::Flat),
        (1, 100, 11, SheetClass::Flat),
        (1, 26, 3, SheetClass::Flat),     // d = 0.1154, below rho
        (1, 1000, 119, SheetClass::Flat), // d = rho - 0.001
        (1, 25, 3, SheetClass::MultiHeader),     // d = rho exactly
        (1, 1000, 120, SheetClass::MultiHeader), // d = rho exactly
        (1, 8, 1, SheetClass::MultiHeader),
        (2, 6, 0, SheetClass::MultiHeader),
        (2, 10, 1, SheetClass::MultiHeader), // H >= 2 with d below rho
        (2, 4, 2, SheetClass::MultiHeader),
        (3, 5, 1, SheetClass::MultiHeader),
        (3, 4, 3, SheetClass::MultiHeader),
        (4, 6, 2, SheetClass::MultiHeader),
        (4, 8, 8, SheetClass::MultiHeader),
    ];
    let sheets: Vec<Sheet> = corpus
        .iter()
        .enumerate()
        .map(|(i, &(h, n, m, _))| header_sheet(&format!("s{i}"), h, n, m, 4))
        .collect();
    let start = Instant::now();
    let mut correct = 0;
    for (sheet, &(h, n, m, want)) in sheets.iter().zip(&corpus) {
        let p = compute_profile(sheet, &cfg).unwrap();
        assert_eq!((p.header_depth, p.header_merge_count), (h, m), "sheet {}", sheet.name());
        let d = m as f64 / (h * n) as f64;
        assert_eq!(p.merge_density, d);
        if p.sheet_class == want {
            correct += 1;
        } else {
            eprintln!("{}: H={h} d={d} expected {want:?}, got {:?}", sheet.name(), p.sheet_class);
        }
    }
    let elapsed = start.elapsed();
    let ok = correct == corpus.len() && elapsed.as_secs_f64() < 1.0;
    report(1, ok, &format!("{correct}/{} labels reproduced in {elapsed:?}", corpus.len()));
}

#[test]
fn criterion_02_complexity_arithmetic() {
    let cfg = ComplexityConfig::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let h = rng.random_range(1..=6);
        let n_cols = rng.random_range(2..=12);
        let m = rng.random_range(0..=h * (n_cols / 2));
        let sheet = header_sheet(&format!("x{i}"), h, n_cols, m, 3);
        let p = compute_profile(&sheet, &cfg).unwrap();
        assert_eq!((p.header_depth, p.header_merge_count), (h, m));
        let direct = 0.6 * h as f64 + 0.4 * m as f64;
        worst = worst.max((p.complexity - direct).abs());
    }
    report(2, worst <= 1e-12, &format!("100 fixtures, max |error| = {worst:e}"));
}

// ---------------------------------------------------------------------------
// Criterion 3: naive reference executor over a test-side query model.

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Real,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
enum V {
    Null,
    I(i64),
    R(f64),
    S(String),
}

impl V {
    fn num(&self) -> Option<f64> {
        match self {
            V::I(i) => Some(*i as f64),
            V::R(r) => Some(*r),
            _ => None,
        }
    }

    fn sql(&self) -> String {
        match self {
            V::I(i) => i.to_string(),
            V::R(r) => format!("{r:?}"),
            V::S(s) => format!("'{}'", s.replace('\'', "''")),
            V::Null => unreachable!("no NULL literals"),
        }
    }

    fn to_sql_value(&self) -> SqlValue {
        match self {
            V::Null => SqlValue::Null,
            V::I(i) => SqlValue::Int(*i),
            V::R(r) => SqlValue::Real(*r),
            V::S(s) => SqlValue::Text(s.clone()),
        }
    }
}

/// SQL comparison of non-null values of compatible types.
fn cmp3(a: &V, b: &V) -> Option<Ordering> {
    match (a, b) {
        (V::Null, _) | (_, V::Null) => None,
        (V::S(x), V::S(y)) => Some(x.cmp(y)),
        (V::I(x), V::I(y)) => Some(x.cmp(y)),
        _ => a.num()?.partial_cmp(&b.num()?),
    }
}

/// Ordering for ORDER BY: NULL lowest.
fn order_cmp(a: &V, b: &V) -> Ordering {
    match (a, b) {
        (V::Null, V::Null) => Ordering::Equal,
        (V::Null, _) => Ordering::Less,
        (_, V::Null) => Ordering::Greater,
        _ => cmp3(a, b).unwrap(),
    }
}

fn like_naive(value: &str, pattern: &str) -> bool {
    fn go(v: &[char], p: &[char]) -> bool {
        match p.split_first() {
            None => v.is_empty(),
            Some(('%', rest)) => (0..=v.len()).any(|i| go(&v[i..], rest)),
            Some(('_', rest)) => !v.is_empty() && go(&v[1..], rest),
            Some((c, rest)) => v.first() == Some(c) && go(&v[1..], rest),
        }
    }
    let v: Vec<char> = value.to_lowercase().chars().collect();
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    go(&v, &p)
}

#[derive(Debug, Clone)]
enum Pred {
    Cmp(usize, &'static str, V),
    Between(usize, V, V, bool),
    In(usize, Vec<V>, bool),
    Like(usize, String, bool),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Agg {
    CountStar,
    Count(usize),
    Sum(usize),
    Avg(usize),
    Min(usize),
    Max(usize),
}

#[derive(Debug, Clone)]
enum Shape {
    Star,
    Columns(Vec<usize>),
    /// Group columns (also projected first) and aggregates.
    Grouped(Vec<usize>, Vec<Agg>),
}

#[derive(Debug, Clone, Copy)]
enum OrderBy {
    Col(usize),
    Agg(Agg),
}

#[derive(Debug, Clone)]
struct Q {
    shape: Shape,
    filter: Option<Pred>,
    order: Vec<(OrderBy, bool)>,
    limit: Option<u64>,
}

struct Tbl {
    names: Vec<String>,
    types: Vec<Ty>,
    rows: Vec<Vec<V>>,
}

fn agg_sql(a: Agg, names: &[String]) -> String {
    match a {
        Agg::CountStar => "COUNT(*)".into(),
        Agg::Count(c) => format!("COUNT({})", names[c]),
        Agg::Sum(c) => format!("SUM({})", names[c]),
        Agg::Avg(c) => format!("AVG({})", names[c]),
        Agg::Min(c) => format!("MIN({})", names[c]),
        Agg::Max(c) => format!("MAX({})", names[c]),
    }
}

fn pred_sql(p: &Pred, names: &[String]) -> String {
    let not = |n: bool| if n { "NOT " } else { "" };
    match p {
        Pred::Cmp(c, op, v) => format!("{} {op} {}", names[*c], v.sql()),
        Pred::Between(c, lo, hi, n) => format!("{} {}BETWEEN {} AND {}", names[*c], not(*n), lo.sql(), hi.sql()),
        Pred::In(c, list, n) => {
            let items: Vec<String> = list.iter().map(V::sql).collect();
            format!("{} {}IN ({})", names[*c], not(*n), items.join(", "))
        }
        Pred::Like(c, pat, n) => format!("{} {}LIKE '{pat}'", names[*c], not(*n)),
        Pred::And(a, b) => format!("({} AND {})", pred_sql(a, names), pred_sql(b, names)),
        Pred::Or(a, b) => format!("({} OR {})", pred_sql(a, names), pred_sql(b, names)),
        Pred::Not(a) => format!("NOT ({})", pred_sql(a, names)),
    }
}

fn query_sql(q: &Q, names: &[String]) -> String {
    let proj = match &q.shape {
        Shape::Star => "*".to_string(),
        Shape::Columns(cols) => cols.iter().map(|&c| names[c].clone()).collect::<Vec<_>>().join(", "),
        Shape::Grouped(g, aggs) => g
            .iter()
            .map(|&c| names[c].clone())
            .chain(aggs.iter().map(|&a| agg_sql(a, names)))
            .collect::<Vec<_>>()
            .join(", "),
    };
    let mut s = format!("SELECT {proj} FROM t");
    if let Some(p) = &q.filter {
        s += &format!(" WHERE {}", pred_sql(p, names));
    }
    if let Shape::Grouped(g, _) = &q.shape {
        if !g.is_empty() {
            s += &format!(" GROUP BY {}", g.iter().map(|&c| names[c].clone()).collect::<Vec<_>>().join(", "));
        }
    }
    if !q.order.is_empty() {
        let keys: Vec<String> = q
            .order
            .iter()
            .map(|(o, d)| {
                let k = match o {
                    OrderBy::Col(c) => names[*c].clone(),
                    OrderBy::Agg(a) => agg_sql(*a, names),
                };
                if *d { format!("{k} DESC") } else { k }
            })
            .collect();
        s += &format!(" ORDER BY {}", keys.join(", "));
    }
    if let Some(n) = q.limit {
        s += &format!(" LIMIT {n}");
    }
    s
}

fn eval_pred(p: &Pred, row: &[V]) -> Option<bool> {
    match p {
        Pred::Cmp(c, op, v) => {
            let o = cmp3(&row[*c], v)?;
            Some(match *op {
                "=" => o == Ordering::Equal,
                "<>" => o != Ordering::Equal,
                "<" => o == Ordering::Less,
                "<=" => o != Ordering::Greater,
                ">" => o == Ordering::Greater,
                ">=" => o != Ordering::Less,
                _ => unreachable!(),
            })
        }
        Pred::Between(c, lo, hi, n) => {
            let a = cmp3(&row[*c], lo).map(|o| o != Ordering::Less);
            let b = cmp3(&row[*c], hi).map(|o| o != Ordering::Greater);
            let both = match (a, b) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            };
            both.map(|x| x != *n)
        }
        Pred::In(c, list, n) => {
            if row[*c] == V::Null {
                return None;
            }
            Some(list.iter().any(|v| cmp3(&row[*c], v) == Some(Ordering::Equal)) != *n)
        }
        Pred::Like(c, pat, n) => match &row[*c] {
            V::S(s) => Some(like_naive(s, pat) != *n),
            _ => None,
        },
        Pred::And(a, b) => match (eval_pred(a, row), eval_pred(b, row)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Pred::Or(a, b) => match (eval_pred(a, row), eval_pred(b, row)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Pred::Not(a) => eval_pred(a, row).map(|b| !b),
    }
}

fn eval_agg(a: Agg, t: &Tbl, rows: &[&Vec<V>]) -> Result<V, ()> {
    let col = |c: usize| -> Vec<&V> { rows.iter().map(|r| &r[c]).filter(|v| **v != V::Null).collect() };
    Ok(match a {
        Agg::CountStar => V::I(rows.len() as i64),
        Agg::Count(c) => V::I(col(c).len() as i64),
        Agg::Sum(c) | Agg::Avg(c) | Agg::Min(c) | Agg::Max(c) if col(c).is_empty() => V::Null,
        Agg::Sum(c) if t.types[c] == Ty::Int => {
            let mut acc = 0i64;
            for v in col(c) {
                if let V::I(i) = v {
                    acc = acc.checked_add(*i).ok_or(())?;
                }
            }
            V::I(acc)
        }
        Agg::Sum(c) => V::R(col(c).iter().map(|v| v.num().unwrap()).sum()),
        Agg::Avg(c) => {
            let vals = col(c);
            V::R(vals.iter().map(|v| v.num().unwrap()).sum::<f64>() / vals.len() as f64)
        }
        Agg::Min(c) => {
            let vals = col(c);
            let mut best = vals[0];
            for v in &vals[1..] {
                if order_cmp(v, best) == Ordering::Less {
                    best = v;
                }
            }
            best.clone()
        }
        Agg::Max(c) => {
            let vals = col(c);
            let mut best = vals[0];
            for v in &vals[1..] {
                if order_cmp(v, best) == Ordering::Greater {
                    best = v;
                }
            }
            best.clone()
        }
    })
}

struct Expected {
    rows: Vec<Vec<V>>,
    truncated: bool,
}

fn reference(q: &Q, t: &Tbl, cap: usize) -> Result<Expected, ()> {
    let kept: Vec<&Vec<V>> = t.rows.iter().filter(|r| q.filter.as_ref().is_none_or(|p| eval_pred(p, r) == Some(true))).collect();
    let mut out: Vec<(Vec<V>, Vec<V>)> = Vec::new();
    match &q.shape {
        Shape::Star | Shape::Columns(_) => {
            for r in kept {
                let tuple = match &q.shape {
                    Shape::Star => r.clone(),
                    Shape::Columns(cols) => cols.iter().map(|&c| r[c].clone()).collect(),
                    Shape::Grouped(..) => unreachable!(),
                };
                let key = q
                    .order
                    .iter()
                    .map(|(o, _)| match o {
                        OrderBy::Col(c) => r[*c].clone(),
                        OrderBy::Agg(_) => unreachable!(),
                    })
                    .collect();
                out.push((key, tuple));
            }
        }
        Shape::Grouped(g, aggs) => {
            let mut groups: Vec<(Vec<V>, Vec<&Vec<V>>)> = Vec::new();
            if g.is_empty() {
                groups.push((Vec::new(), kept));
            } else {
                for r in kept {
                    let key: Vec<V> = g.iter().map(|&c| r[c].clone()).collect();
                    match groups.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, members)) => members.push(r),
                        None => groups.push((key, vec![r])),
                    }
                }
            }
            for (key, members) in groups {
                let mut tuple = key.clone();
                for &a in aggs {
                    tuple.push(eval_agg(a, t, &members)?);
                }
                let mut okey = Vec::new();
                for (o, _) in &q.order {
                    okey.push(match o {
                        OrderBy::Col(c) => key[g.iter().position(|x| x == c).unwrap()].clone(),
                        OrderBy::Agg(a) => eval_agg(*a, t, &members)?,
                    });
                }
                out.push((okey, tuple));
            }
        }
    }
    // Insertion sort: stable by construction.
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && {
            let mut ord = Ordering::Equal;
            for (k, (_, desc)) in q.order.iter().enumerate() {
                let o = order_cmp(&out[j - 1].0[k], &out[j].0[k]);
                let o = if *desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    ord = o;
                    break;
                }
            }
            ord == Ordering::Greater
        } {
            out.swap(j - 1, j);
            j -= 1;
        }
    }
    let total = out.len();
    let effective = q.limit.map_or(cap, |n| (n as usize).min(cap));
    let truncated = q.limit.is_none_or(|n| n as usize >= cap) && total > cap;
    Ok(Expected { rows: out.into_iter().take(effective).map(|(_, t)| t).collect(), truncated })
}

const WORDS: [&str; 7] = ["alpha", "Beta", "gamma", "alp", "delta", "o'neil", "beta"];

fn random_value(rng: &mut ChaCha8Rng, ty: Ty) -> V {
    match ty {
        Ty::Int => V::I(rng.random_range(-5..=20)),
        Ty::Real => V::R(f64::from(rng.random_range(-8..=40)) * 0.25),
        Ty::Text => V::S(WORDS.choose(rng).unwrap().to_string()),
    }
}

fn random_table(rng: &mut ChaCha8Rng) -> Tbl {
    let n_cols = rng.random_range(1..=6);
    let n_rows = rng.random_range(0..=50);
    let types: Vec<Ty> = (0..n_cols).map(|_| *[Ty::Int, Ty::Real, Ty::Text].choose(rng).unwrap()).collect();
    let names = (0..n_cols).map(|i| format!("c{i}")).collect();
    let rows = (0..n_rows)
        .map(|_| types.iter().map(|&ty| if rng.random_bool(0.15) { V::Null } else { random_value(rng, ty) }).collect())
        .collect();
    Tbl { names, types, rows }
}

fn random_pred(rng: &mut ChaCha8Rng, t: &Tbl, depth: u32) -> Pred {
    if depth < 2 && rng.random_bool(0.35) {
        let a = Box::new(random_pred(rng, t, depth + 1));
        return match rng.random_range(0..3) {
            0 => Pred::And(a, Box::new(random_pred(rng, t, depth + 1))),
            1 => Pred::Or(a, Box::new(random_pred(rng, t, depth + 1))),
            _ => Pred::Not(a),
        };
    }
    let c = rng.random_range(0..t.names.len());
    let ty = t.types[c];
    // Numeric columns may be compared with either numeric literal kind.
    let lit = |rng: &mut ChaCha8Rng| match ty {
        Ty::Text => random_value(rng, Ty::Text),
        _ => {
            let kind = if rng.random_bool(0.5) { Ty::Int } else { Ty::Real };
            random_value(rng, kind)
        }
    };
    match rng.random_range(0..4) {
        0 => {
            let op = *["=", "<>", "<", "<=", ">", ">="].choose(rng).unwrap();
            Pred::Cmp(c, op, lit(rng))
        }
        1 => Pred::Between(c, lit(rng), lit(rng), rng.random_bool(0.3)),
        2 => Pred::In(c, (0..rng.random_range(1..=3)).map(|_| lit(rng)).collect(), rng.random_bool(0.3)),
        _ if ty == Ty::Text => {
            let pat = ["al%", "%a", "_eta", "%", "b%a", "%l_%", "gamma"].choose(rng).unwrap();
            Pred::Like(c, pat.to_string(), rng.random_bool(0.3))
        }
        _ => Pred::Cmp(c, ">", lit(rng)),
    }
}

fn random_agg(rng: &mut ChaCha8Rng, t: &Tbl) -> Agg {
    let c = rng.random_range(0..t.names.len());
    let numeric = t.types[c] != Ty::Text;
    match rng.random_range(0..6) {
        0 => Agg::CountStar,
        1 => Agg::Count(c),
        2 if numeric => Agg::Sum(c),
        3 if numeric => Agg::Avg(c),
        4 => Agg::Min(c),
        _ => Agg::Max(c),
    }
}

fn random_query(rng: &mut ChaCha8Rng, t: &Tbl) -> Q {
    let n = t.names.len();
    let shape = match rng.random_range(0..4) {
        0 => Shape::Star,
        1 => Shape::Columns((0..rng.random_range(1..=n)).map(|_| rng.random_range(0..n)).collect()),
        2 => Shape::Grouped(Vec::new(), (0..rng.random_range(1..=3)).map(|_| random_agg(rng, t)).collect()),
        _ => {
            let mut g: Vec<usize> = (0..rng.random_range(1..=2.min(n))).map(|_| rng.random_range(0..n)).collect();
            g.dedup();
            Shape::Grouped(g, (0..rng.random_range(1..=2)).map(|_| random_agg(rng, t)).collect())
        }
    };
    let filter = rng.random_bool(0.7).then(|| random_pred(rng, t, 0));
    let mut order = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        let key = match &shape {
            Shape::Grouped(g, _) if !g.is_empty() && rng.random_bool(0.5) => OrderBy::Col(*g.choose(rng).unwrap()),
            Shape::Grouped(..) => OrderBy::Agg(random_agg(rng, t)),
            _ => OrderBy::Col(rng.random_range(0..n)),
        };
        order.push((key, rng.random_bool(0.5)));
    }
    let limit = match rng.random_range(0..4) {
        0 => Some(rng.random_range(0..8)),
        1 => Some(rng.random_range(20..300)),
        _ => None,
    };
    Q { shape, filter, order, limit }
}

fn to_relational(t: &Tbl) -> RelationalTable {
    let schema = t
        .names
        .iter()
        .zip(&t.types)
        .map(|(n, ty)| ColumnSchema {
            name: n.clone(),
            original_label: n.clone(),
            col_type: match ty {
                Ty::Int => ColumnType::Integer,
                Ty::Real => ColumnType::Real,
                Ty::Text => ColumnType::Text,
            },
            unit: None,
        })
        .collect();
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| TableRow { source_row: i + 1, values: r.iter().map(V::to_sql_value).collect() })
        .collect();
    RelationalTable::new(schema, rows)
}

#[test]
fn criterion_03_sql_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let (mut checked, mut mismatches) = (0usize, 0usize);
    while checked < 1000 {
        let t = random_table(&mut rng);
        let rel = to_relational(&t);
        let q = random_query(&mut rng, &t);
        let cap = if rng.random_bool(0.3) { 10 } else { 200 };
        let sql = query_sql(&q, &t.names);
        let validated = validate(parse_sql(&sql).unwrap_or_else(|e| panic!("{sql}: {e}")), &rel.schema, cap)
            .unwrap_or_else(|e| panic!("{sql}: {e}"));
        let got = execute(&validated, &rel);
        let want = reference(&q, &t, cap);
        let same = match (&got, &want) {
            (Ok(g), Ok(w)) => {
                let rows: Vec<Vec<SqlValue>> = w.rows.iter().map(|r| r.iter().map(V::to_sql_value).collect()).collect();
                g.rows == rows && g.truncated == w.truncated
            }
            (Err(SqlError::Overflow(_)), Err(())) => true,
            _ => false,
        };
        if !same {
            mismatches += 1;
            eprintln!("mismatch for {sql}");
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    report(
        3,
        mismatches == 0 && elapsed.as_secs_f64() < 30.0,
        &format!("{checked} random queries, {mismatches} mismatches, {elapsed:?}"),
    );
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Rejected {
    Parse,
    Unsupported(&'static str),
    UnknownColumn,
}

#[test]
fn criterion_04_guardrails() {
    use Rejected::*;
    let cases: Vec<(&str, Rejected)> = vec![
        ("DROP TABLE t", Unsupported("DDL")),
        ("drop table t", Unsupported("DDL")),
        ("DELETE FROM t", Unsupported("DML")),
        ("DELETE FROM t WHERE year = 2020", Unsupported("DML")),
        ("INSERT INTO t VALUES (1, 2)", Unsupported("DML")),
        ("UPDATE t SET gdp = 0", Unsupported("DML")),
        ("CREATE TABLE x (a INT)", Unsupported("DDL")),
        ("ALTER TABLE t ADD COLUMN z", Unsupported("DDL")),
        ("TRUNCATE t", Unsupported("DDL")),
        ("REPLACE INTO t VALUES (1)", Unsupported("DML")),
        ("PRAGMA table_info(t)", Unsupported("PRAGMA")),
        ("ATTACH DATABASE 'x.db' AS x", Unsupported("ATTACH")),
        ("DETACH DATABASE x", Unsupported("DETACH")),
        ("VACUUM", Unsupported("maintenance")),
        ("GRANT ALL ON t TO public", Unsupported("access control")),
        ("WITH x AS (SELECT country FROM t) SELECT country FROM x", Unsupported("CTE")),
        ("EXPLAIN SELECT country FROM t", Unsupported("EXPLAIN")),
        ("SELECT country FROM t; DROP TABLE t", Unsupported("multiple statements")),
        ("SELECT country FROM t; SELECT year FROM t", Unsupported("multiple statements")),
        ("SELECT country FROM t;DELETE FROM t", Unsupported("multiple statements")),
        ("SELECT country FROM t -- ; DROP TABLE t", Unsupported("comments")),
        ("SELECT country FROM t /* hidden */", Unsupported("comments")),
        ("SELECT/**/country FROM t", Unsupported("comments")),
        ("SELECT country FROM t WHERE year = 2020 --", Unsupported("comments")),
        ("SELECT country FROM t /*; DROP TABLE t */", Unsupported("comments")),
        ("SELECT country FROM t UNION SELECT year FROM t", Unsupported("set operation")),
        ("SELECT country FROM t UNION ALL SELECT country FROM t", Unsupported("set operation")),
        ("SELECT country FROM t INTERSECT SELECT country FROM t", Unsupported("set operation")),
        ("SELECT country FROM t EXCEPT SELECT country FROM t", Unsupported("set operation")),
        ("SELECT country FROM t WHERE year IN (SELECT year FROM t)", Unsupported("subquery")),
        ("SELECT country FROM (SELECT country FROM t)", Unsupported("subquery")),
        ("SELECT (SELECT MAX(year) FROM t) FROM t", Unsupported("subquery")),
        ("SELECT country FROM t WHERE EXISTS (SELECT 1 FROM t)", Unsupported("subquery")),
        ("SELECT a.country FROM t a JOIN t b ON a.year = b.year", Unsupported("qualified")),
        ("SELECT country FROM t JOIN u ON t.year = u.year", Unsupported("JOIN")),
        ("SELECT country FROM t, u", Unsupported("join")),
        ("SELECT country FROM t LEFT JOIN u ON 1 = 1", Unsupported("JOIN")),
        ("SELECT country FROM t CROSS JOIN u", Unsupported("JOIN")),
        ("SELECT country FROM users", Unsupported("table")),
        ("SELECT country FROM sqlite_master", Unsupported("table")),
        ("SELECT name FROM sqlite_master", Unsupported("table")),
        ("SELECT country FROM t WHERE year = 2020 OR 1 = 1", Parse),
        ("SELECT country FROM t WHERE gdp = gdp", Unsupported("column")),
        ("SELECT load_extension('x') FROM t", Unsupported("function")),
        ("SELECT country FROM t WHERE LOWER(country) = 'x'", Unsupported("function")),
        ("SELECT gdp * 2 FROM t", Unsupported("arithmetic")),
        ("SELECT country FROM t WHERE gdp + 1 > 2", Unsupported("arithmetic")),
        ("SELECT country FROM t WHERE country IS NULL", Unsupported("IS NULL")),
        ("SELECT country FROM t WHERE country = NULL", Unsupported("NULL")),
        ("SELECT DISTINCT country FROM t", Unsupported("DISTINCT")),
        ("SELECT country, COUNT(*) FROM t GROUP BY country HAVING COUNT(*) > 1", Unsupported("HAVING")),
        ("SELECT password FROM t", UnknownColumn),
        ("SELECT country FROM t WHERE secret = 1", UnknownColumn),
        ("SELECT country FROM t LIMIT -1", Parse),
        ("SELECT country FROM t WHERE country = 'x'' OR 1=1 --", Parse),
        ("SELECT country FROM", Parse),
        ("", Parse),
        ("SELECT country FROM t WHERE", Parse),
    ];
    let col = |name: &str, col_type| ColumnSchema { name: name.into(), original_label: name.into(), col_type, unit: None };
    let table = RelationalTable::new(
        vec![col("country", ColumnType::Text), col("year", ColumnType::Integer), col("gdp", ColumnType::Real)],
        vec![TableRow { source_row: 1, values: vec![SqlValue::Text("A".into()), SqlValue::Int(2020), SqlValue::Real(1.5)] }],
    );
    let mut executed = 0;
    let mut wrong = Vec::new();
    for (sql, expected) in &cases {
        let outcome = parse_sql(sql).and_then(|ast| validate(ast, &table.schema, 200));
        let err = match outcome {
            Ok(v) => {
                executed += 1;
                let _ = execute(&v, &table);
                wrong.push(format!("{sql:?} was accepted"));
                continue;
            }
            Err(e) => e,
        };
        let matches = match (expected, &err) {
            (Parse, SqlError::Parse { .. }) => true,
            (UnknownColumn, SqlError::UnknownColumn { .. }) => true,
            (Unsupported(s), SqlError::UnsupportedFeature(m)) => m.to_lowercase().contains(&s.to_lowercase()),
            _ => false,
        };
        if !matches {
            wrong.push(format!("{sql:?}: expected {expected:?}, got {err}"));
        }
    }
    for w in &wrong {
        eprintln!("{w}");
    }
    report(
        4,
        executed == 0 && wrong.is_empty() && cases.len() >= 50,
        &format!("{} statements, {executed} executed, {} with an unexpected error", cases.len(), wrong.len()),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_05_router_never_attempts_sql_on_multiheader() {
    let mut fixtures: Vec<Sheet> = (0..5).map(|s| statement_sheet(&format!("statement{s}"), s)).collect();
    for (i, &(h, n, m)) in [(2, 5, 1), (3, 6, 2), (4, 4, 0), (2, 8, 3), (3, 3, 1)].iter().enumerate() {
        fixtures.push(header_sheet(&format!("grid{i}"), h, n, m, 12));
    }
    let templates = [
        "What is the average {w} in {y}?",
        "How many {w} exceed 100?",
        "What was the total {w} between {y} and 2022?",
        "Which {w} had the highest value in {y}?",
        "What was {w} in {y}?",
        "Count the {w} above 50",
        "Show {w} for FY{y}",
    ];
    let words = ["Product sales", "Services", "Staff", "Rent", "revenue", "item 3", "h0c1", "Marketing"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let questions: Vec<String> = (0..200)
        .map(|_| {
            let t = templates.choose(&mut rng).unwrap();
            t.replace("{w}", words.choose(&mut rng).unwrap()).replace("{y}", &rng.random_range(2014..2024).to_string())
        })
        .collect();

    // Mocks that would always pick SQL and always offer a query.
    let gateway = Arc::new(Gateway::new(
        MockBackend::standard()
            .with_entry(Purpose::DecideMode, "", "sql")
            .with_entry(Purpose::GenerateSql, "", "SELECT * FROM t"),
    ));
    let (mut queries, mut sql_calls) = (0usize, 0usize);
    for ablation in Ablation::ALL {
        let config = EngineConfig::<f64> {
            ablation,
            router: Backend::Model,
            sql_generator: Backend::Model,
            ..EngineConfig::default()
        };
        let engine = Engine::new(config, gateway.clone()).unwrap();
        for sheet in &fixtures {
            let index = engine.index_sheet(sheet).unwrap();
            assert_eq!(index.profile.sheet_class, SheetClass::MultiHeader, "{}", sheet.name());
            assert!(index.relational.is_none());
            for q in &questions {
                let a = engine.run_query(&index, q).unwrap();
                sql_calls += a.budget.generate_sql;
                queries += 1;
            }
        }
    }
    let logged = gateway.log().iter().filter(|c| c.purpose == Purpose::GenerateSql).count();
    report(
        5,
        sql_calls == 0 && logged == 0 && queries == 200 * 10 * 4,
        &format!("{queries} queries over 10 fixtures x 4 ablations, generate_sql = {sql_calls}, logged = {logged}"),
    );
}

// ---------------------------------------------------------------------------
// Conformance matrix (criteria 6, 9, 10).

/// Every text maps to the same direction, so every block scores cosine 1 and
/// the gate outcome is decided by metadata consistency alone.
struct Uniform;

impl Embedder<f64> for Uniform {
    fn id(&self) -> String {
        "uniform".into()
    }

    fn embed(&self, _text: &str) -> Result<EmbeddingVector<f64>, EmbedError> {
        Ok(EmbeddingVector::new(vec![1.0, 0.0]))
    }
}

const REGIONS: [&str; 5] = ["North", "South", "East", "West", "Central"];

fn sales(year: usize, region: usize) -> usize {
    100 + 37 * region + 11 * (year - 2015) + (region * year) % 7
}

/// region | year | sales, one year per five-row block (2015..=2020).
fn sales_sheet() -> Sheet {
    let mut rows = vec![vec!["region".to_string(), "year".to_string(), "sales".to_string()]];
    for year in 2015..=2020 {
        for (i, r) in REGIONS.iter().enumerate() {
            rows.push(vec![r.to_string(), year.to_string(), sales(year, i).to_string()]);
        }
    }
    Sheet::new("Sales", CellGrid::from_text_rows(&rows), vec![]).unwrap()
}

struct Scenario {
    name: &'static str,
    question: &'static str,
    status: AnswerStatus,
    origin: Option<EvidenceOrigin>,
    path: &'static [&'static str],
    answer: Option<String>,
}

fn scenarios() -> Vec<Scenario> {
    let avg_2019 = (0..5).map(|r| sales(2019, r)).sum::<usize>() as f64 / 5.0;
    vec![
        Scenario {
            name: "sql-primary-pass",
            question: "What is the average sales in 2019?",
            status: AnswerStatus::Answered,
            origin: Some(EvidenceOrigin::Sql),
            path: &["decide", "sql-pass", "answer"],
            answer: Some(format!("{avg_2019}")),
        },
        Scenario {
            name: "chunk-primary-pass",
            question: "What were the sales of North in 2016?",
            status: AnswerStatus::Answered,
            origin: Some(EvidenceOrigin::Chunk),
            path: &["decide", "chunk-pass", "answer"],
            answer: Some(sales(2016, 0).to_string()),
        },
        Scenario {
            name: "chunk-fail->sql-pass",
            question: "What were the sales of West in 2019?",
            status: AnswerStatus::Answered,
            origin: Some(EvidenceOrigin::Sql),
            path: &["decide", "chunk-fail", "sql-pass", "answer"],
            answer: Some(sales(2019, 3).to_string()),
        },
        Scenario {
            name: "both-fail->merge-pass",
            question: "What were the sales figures recorded in 2019?",
            status: AnswerStatus::Answered,
            origin: Some(EvidenceOrigin::Merged),
            path: &["decide", "chunk-fail", "sql-fail", "merge-pass", "answer"],
            answer: None,
        },
        Scenario {
            name: "all-fail->abstain",
            question: "What were the sales of North in 2031?",
            status: AnswerStatus::Abstained,
            origin: None,
            path: &["decide", "chunk-fail", "sql-fail", "merge-fail", "abstain"],
            answer: None,
        },
    ]
}

/// theta sits between a full-penalty chunk bundle (0.5) and a clean one (1.0);
/// a five-row cap makes a whole-year SQL result score below theta.
fn matrix_engine() -> Engine<f64> {
    let config = EngineConfig::<f64> { theta: 0.75, row_cap: 5, max_block_rows: 5, ..EngineConfig::default() };
    Engine::new(config, Arc::new(Gateway::new(MockBackend::standard()))).unwrap().with_embedder(Arc::new(Uniform))
}

fn run_matrix() -> Vec<(Scenario, Answer<f64>)> {
    let engine = matrix_engine();
    let index = engine.index_sheet(&sales_sheet()).unwrap();
    scenarios()
        .into_iter()
        .map(|s| {
            let a = engine.run_query(&index, s.question).unwrap();
            (s, a)
        })
        .collect()
}

#[test]
fn criterion_06_algorithm_conformance() {
    let first = run_matrix();
    let second = run_matrix();
    let mut failures = Vec::new();
    for ((s, a), (_, b)) in first.iter().zip(&second) {
        let path = a.path_labels();
        println!("  {:<22} {:?} {:?} {:?}", s.name, a.status, path, a.answer);
        if a.status != s.status || a.origin() != s.origin || path != s.path {
            failures.push(format!("{}: got {:?} {:?} {:?}", s.name, a.status, a.origin(), path));
        }
        if let Some(want) = &s.answer {
            if !a.answer.as_deref().is_some_and(|got| exact_match(got, want)) {
                failures.push(format!("{}: answer {:?}, expected {want}", s.name, a.answer));
            }
        }
        if serde_json::to_string(a).unwrap() != serde_json::to_string(b).unwrap() {
            failures.push(format!("{}: not byte-reproducible", s.name));
        }
    }
    for f in &failures {
        eprintln!("{f}");
    }
    report(6, failures.is_empty(), &format!("{} paths, {} deviations", first.len(), failures.len()));
}

fn numeric_tokens(text: &str) -> Vec<String> {
    let re = regex::Regex::new(r"-?\d+(?:\.\d+)?").unwrap();
    re.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

#[test]
fn criterion_09_evidence_fidelity() {
    let (mut answered, mut tokens, mut violations) = (0, 0, Vec::new());
    for (s, a) in run_matrix() {
        let Some(text) = &a.answer else { continue };
        answered += 1;
        for t in numeric_tokens(text) {
            tokens += 1;
            if !a.evidence.contains_verbatim(&t) {
                violations.push(format!("{}: {t} not in evidence", s.name));
            }
        }
    }
    for v in &violations {
        eprintln!("{v}");
    }
    report(
        9,
        violations.is_empty() && answered == 4 && tokens > 0,
        &format!("{answered} answered queries, {tokens} numeric tokens, {} violations", violations.len()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: ablation ordering on a flat synthetic dataset.

const COUNTRIES: [&str; 12] = [
    "Aland", "Borduria", "Carpania", "Dorvik", "Elbonia", "Freedonia", "Genovia", "Havenland", "Illyria", "Jemora",
    "Kravia", "Latveria",
];
const YEARS: [usize; 5] = [2019, 2020, 2021, 2022, 2023];

fn gdp(c: usize, y: usize) -> usize {
    40 + 23 * c + 6 * (y - 2019) + (c * 13 + y) % 9
}

fn population(c: usize, y: usize) -> usize {
    5 + 3 * c + (y - 2019) + (c * 7 + y) % 4
}

/// Exact decimal rendering of `num / den` for small denominators dividing a power of ten.
fn decimal(num: usize, den: usize) -> String {
    let scaled = num * 100 / den;
    assert_eq!(scaled * den, num * 100, "non-terminating mean");
    let (int, frac) = (scaled / 100, scaled % 100);
    match frac {
        0 => int.to_string(),
        f if f % 10 == 0 => format!("{int}.{}", f / 10),
        f => format!("{int}.{f:02}"),
    }
}

fn write_flat_dataset(dir: &std::path::Path) -> std::path::PathBuf {
    let mut csv = String::from("country,year,gdp (USD bn),population (million)\n");
    for (c, name) in COUNTRIES.iter().enumerate() {
        for &y in &YEARS {
            csv += &format!("{name},{y},{},{}\n", gdp(c, y), population(c, y));
        }
    }
    fs::write(dir.join("countries.csv"), csv).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut records = Vec::new();
    let mut push = |q: String, gold: String, tier: &str| {
        let id = format!("q{:02}", records.len());
        records.push(serde_json::json!({
            "id": id, "question": q, "gold_answer": gold, "tier": tier,
            "sheet_ref": {"file": "countries.csv", "sheet": "countries"},
        }));
    };
    for _ in 0..20 {
        let (c, y) = (rng.random_range(0..12), *YEARS.choose(&mut rng).unwrap());
        push(format!("What was the GDP of {} in {y}?", COUNTRIES[c]), gdp(c, y).to_string(), "easy");
    }
    for _ in 0..15 {
        let c = rng.random_range(0..12);
        let total: usize = YEARS.iter().map(|&y| gdp(c, y)).sum();
        push(format!("What was the average GDP of {} between 2019 and 2023?", COUNTRIES[c]), decimal(total, 5), "medium");
    }
    for _ in 0..10 {
        let y = *YEARS.choose(&mut rng).unwrap();
        let total: usize = (0..12).map(|c| population(c, y)).sum();
        push(format!("What was the total population in {y}?"), total.to_string(), "medium");
    }
    for _ in 0..10 {
        let (y, x) = (*YEARS.choose(&mut rng).unwrap(), rng.random_range(60..260));
        let n = (0..12).filter(|&c| gdp(c, y) > x).count();
        push(format!("How many countries had GDP greater than {x} in {y}?"), n.to_string(), "hard");
    }
    for _ in 0..5 {
        let y = *YEARS.choose(&mut rng).unwrap();
        let best = (0..12).max_by_key(|&c| gdp(c, y)).unwrap();
        push(format!("Which country had the highest GDP in {y}?"), COUNTRIES[best].to_string(), "hard");
    }
    assert_eq!(records.len(), 60);
    let path = dir.join("flat.jsonl");
    let lines: Vec<String> = records.iter().map(|r| r.to_string()).collect();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn flat_reports() -> Vec<sheetqa_core::eval::EvalReport> {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write_flat_dataset(dir.path());
    let gateway = Arc::new(Gateway::new(MockBackend::standard()));
    run_eval_all(&dataset, &EngineConfig::<f64>::default(), gateway).unwrap()
}

#[test]
fn criterion_07_ablation_ordering() {
    let reports = flat_reports();
    let acc = |a: Ablation| reports.iter().find(|r| r.ablation == a).unwrap().exact_match_accuracy;
    for r in &reports {
        println!("  {:<12} accuracy {:.3} answered {}", r.ablation.title(), r.exact_match_accuracy, r.n_answered);
    }
    let (full, no_fb, chunk, sql) =
        (acc(Ablation::Full), acc(Ablation::NoFallback), acc(Ablation::ChunkOnly), acc(Ablation::SqlOnly));
    report(
        7,
        full >= no_fb && full >= chunk && sql >= chunk,
        &format!("full {full:.3}, no_fallback {no_fb:.3}, chunk_only {chunk:.3}, sql_only {sql:.3}"),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_08_recall_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let retrieved: Vec<u8> = (0..rng.random_range(0..8)).map(|_| rng.random_range(0..10)).collect();
        let gold: Vec<u8> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..10)).collect();
        let k = rng.random_range(1..6);
        // Brute force: count distinct gold items found among the first k.
        let distinct: BTreeSet<u8> = gold.iter().copied().collect();
        let mut hits = 0;
        for g in &distinct {
            if retrieved.iter().take(k).any(|r| r == g) {
                hits += 1;
            }
        }
        let oracle = hits as f64 / distinct.len() as f64;
        if recall_at_k(&retrieved, &gold, k).unwrap() != oracle {
            mismatches += 1;
        }
    }
    let hand = [
        recall_at_k(&["b1", "b3", "b4"], &["b1", "b2"], 3).unwrap(),
        recall_at_k(&["b2", "b1", "b4"], &["b1", "b2"], 3).unwrap(),
        recall_at_k(&["b1", "b2", "b3"], &["b7"], 3).unwrap(),
    ];
    let errors_ok = matches!(recall_at_k::<u8>(&[1], &[], 3), Err(EvalError::EmptyGold))
        && matches!(recall_at_k(&[1u8], &[1], 0), Err(EvalError::InvalidK));
    report(
        8,
        mismatches == 0 && hand == [0.5, 1.0, 0.0] && errors_ok,
        &format!("1000 random triples, {mismatches} mismatches; hand-checked {hand:?}"),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_10_budget_accounting() {
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut check = |label: &str, path: &[String], answered: bool, generate_sql: usize, answer: usize| {
        if !answered {
            if answer != 0 {
                violations.push(format!("{label}: abstained but answer = {answer}"));
            }
            return;
        }
        checked += 1;
        let sql_path = path.iter().any(|p| p == "sql-pass" || p == "merge-pass");
        if answer != 1 {
            violations.push(format!("{label}: answer = {answer}"));
        }
        let sql_attempts = path.iter().filter(|p| p.starts_with("sql-")).count();
        if generate_sql > 3 * sql_attempts || (sql_path && generate_sql > 3) {
            violations.push(format!("{label}: generate_sql = {generate_sql}"));
        }
    };
    for (s, a) in run_matrix() {
        check(s.name, &a.path_labels(), a.status == AnswerStatus::Answered, a.budget.generate_sql, a.budget.answer);
    }
    for r in flat_reports() {
        for q in &r.queries {
            let label = format!("{}/{}", r.ablation.as_str(), q.id);
            check(&label, &q.path, q.status == AnswerStatus::Answered, q.budget.generate_sql, q.budget.answer);
        }
    }
    for v in &violations {
        eprintln!("{v}");
    }
    report(10, violations.is_empty(), &format!("{checked} answered queries, {} violations", violations.len()));
}
