//! Routing decision, confidence scores and context summarization.

use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::config::{Backend, SqlWeights};
use crate::chunk::Block;
use crate::llm::{estimate_tokens, prompts, Gateway, InvocationBudget, LlmError, ModelRequest, Purpose};
use crate::scalar::Scalar;
use crate::sql::{Expr, OrderTarget, ResultRows, SelectItem, SqlAst};
use crate::text::{content_words, extract_years, numeric_tokens, stem, unit_mentions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Chunk,
    Sql,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub mode: Mode,
    pub rationale: String,
    pub source: Backend,
}

static SQL_CUES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(average|mean|sum|total|count|how many|number of|greater than|less than|more than|fewer than|higher than|lower than|larger than|smaller than|between|above|below|at least|at most|exceed\w*|highest|lowest|maximum|minimum)\b",
    )
    .unwrap()
});

/// Cue-word router: on Flat sheets, aggregation and filter cues route to SQL.
pub fn rule_decision(question: &str, flat: bool) -> RoutingDecision {
    if !flat {
        return RoutingDecision {
            mode: Mode::Chunk,
            rationale: "sheet is not flat; SQL is never attempted".into(),
            source: Backend::Rule,
        };
    }
    match SQL_CUES.find(question) {
        Some(m) => RoutingDecision {
            mode: Mode::Sql,
            rationale: format!("aggregation/filter cue {:?}", m.as_str().to_ascii_lowercase()),
            source: Backend::Rule,
        },
        None => RoutingDecision { mode: Mode::Chunk, rationale: "no aggregation or filter cue".into(), source: Backend::Rule },
    }
}

/// Mode choice. Non-flat sheets always get chunk retrieval without a model
/// call; with the model router, a reply other than `chunk`/`sql` (or a
/// failed call) falls back to the rule decision.
pub fn agent_decision(
    question: &str,
    complexity: f64,
    flat: bool,
    router: Backend,
    gateway: &Gateway,
    budget: &mut InvocationBudget,
) -> RoutingDecision {
    let rule = rule_decision(question, flat);
    if !flat || router == Backend::Rule {
        return rule;
    }
    let req = ModelRequest::new(Purpose::DecideMode, prompts::decide_prompt(question, complexity, flat), 4);
    let reply = gateway.complete(&req, budget).map(|r| r.text.trim().to_ascii_lowercase());
    let mode = match reply.as_deref() {
        Ok("sql") => Mode::Sql,
        Ok("chunk") => Mode::Chunk,
        Ok(other) => {
            return RoutingDecision { rationale: format!("model reply {other:?} rejected; {}", rule.rationale), ..rule };
        }
        Err(e) => return RoutingDecision { rationale: format!("model router failed ({e}); {}", rule.rationale), ..rule },
    };
    RoutingDecision { mode, rationale: "model decision".into(), source: Backend::Model }
}

/// Year and unit labels available to the consistency check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaPool {
    pub years: BTreeSet<u16>,
    pub units: Vec<String>,
}

impl MetaPool {
    pub fn from_blocks<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Self {
        let mut pool = MetaPool::default();
        for b in blocks {
            pool.years.extend(b.metadata.year_labels.iter().map(|y| y.year));
            pool.units.extend(b.metadata.unit.iter().map(|u| u.to_lowercase()));
        }
        pool
    }

    pub fn add_text(&mut self, text: &str) {
        self.years.extend(extract_years(text).iter().map(|y| y.year));
    }

    pub fn add_unit(&mut self, unit: &str) {
        self.units.push(unit.to_lowercase());
    }

    pub fn extend(&mut self, other: &MetaPool) {
        self.years.extend(&other.years);
        self.units.extend(other.units.iter().cloned());
    }

    /// Every year and unit mentioned in the question is present in the pool.
    pub fn covers(&self, question: &str) -> bool {
        let years_ok = extract_years(question).iter().all(|y| self.years.contains(&y.year));
        let units_ok = unit_mentions(question).iter().all(|m| {
            let m = stem(m);
            self.units.iter().any(|u| u.contains(&m))
        });
        years_ok && units_ok
    }
}

/// Max cosine over the forwarded blocks, scaled by `penalty` when the
/// question names a year or unit absent from `pool`.
pub fn chunk_confidence<F: Scalar>(question: &str, scores: &[F], pool: &MetaPool, penalty: F) -> F {
    let best = scores.iter().copied().fold(F::zero(), F::max).max(F::zero());
    if pool.covers(question) {
        best
    } else {
        best * penalty
    }
}

fn referenced_columns(ast: &SqlAst) -> HashSet<&str> {
    let mut cols: HashSet<&str> = HashSet::new();
    for p in &ast.projections {
        match p {
            SelectItem::Column { name, .. } => {
                cols.insert(name);
            }
            SelectItem::Aggregate { arg: Some(a), .. } => {
                cols.insert(a);
            }
            _ => {}
        }
    }
    if let Some(w) = &ast.where_clause {
        cols.extend(Expr::columns(w));
    }
    cols.extend(ast.group_by.iter().map(String::as_str));
    for k in &ast.order_by {
        match &k.target {
            OrderTarget::Column(c) => {
                cols.insert(c);
            }
            OrderTarget::Aggregate { arg: Some(a), .. } => {
                cols.insert(a);
            }
            _ => {}
        }
    }
    cols
}

/// Fraction of the question's content words that name a selected or filtered column.
pub fn schema_coverage(question: &str, ast: &SqlAst) -> f64 {
    let q: BTreeSet<String> = content_words(question).iter().map(|w| stem(w)).collect();
    if q.is_empty() {
        return 0.0;
    }
    let col_tokens: HashSet<String> = referenced_columns(ast)
        .into_iter()
        .flat_map(|c| c.split('_').filter(|t| !t.is_empty()).map(stem).collect::<Vec<_>>())
        .collect();
    let hits = q.iter().filter(|w| col_tokens.contains(*w)).count();
    (hits as f64 / q.len() as f64).min(1.0)
}

/// 0 for an empty result, else `base + coverage_w * coverage + selectivity_w * (1 - rows / cap)`.
pub fn sql_confidence<F: Scalar>(question: &str, ast: &SqlAst, rows: &ResultRows, row_cap: usize, w: &SqlWeights<F>) -> F {
    if rows.is_empty() {
        return F::zero();
    }
    let coverage = F::lit(schema_coverage(question, ast));
    let selectivity = F::one() - F::from_count(rows.len().min(row_cap)) / F::from_count(row_cap.max(1));
    w.base + w.coverage * coverage + w.selectivity * selectivity
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub text: String,
    /// The model output still exceeded the budget and was cut at a line boundary.
    pub truncated: bool,
    /// Lines removed because they carried numbers absent from the original context.
    pub dropped_lines: usize,
}

/// Summarizes `ctx` through the gateway, drops lines whose numbers do not
/// occur in `ctx`, then truncates at a line boundary if still over `budget_tokens`.
pub fn summarize_context(
    ctx: &str,
    budget_tokens: usize,
    gateway: &Gateway,
    budget: &mut InvocationBudget,
) -> Result<Summary, LlmError> {
    let req = ModelRequest::new(Purpose::Summarize, prompts::summarize_prompt(ctx, budget_tokens), budget_tokens);
    let resp = gateway.complete(&req, budget)?;
    let known: HashSet<&str> = numeric_tokens(ctx).into_iter().collect();
    let mut kept = Vec::new();
    let mut dropped_lines = 0;
    for line in resp.text.lines() {
        if numeric_tokens(line).iter().all(|t| known.contains(t)) {
            kept.push(line);
        } else {
            dropped_lines += 1;
        }
    }
    let mut text = kept.join("\n");
    let mut truncated = false;
    if estimate_tokens(&text) > budget_tokens {
        truncated = true;
        let mut out = String::new();
        for line in &kept {
            let candidate = if out.is_empty() { line.to_string() } else { format!("{out}\n{line}") };
            if estimate_tokens(&candidate) > budget_tokens {
                break;
            }
            out = candidate;
        }
        text = out;
    }
    Ok(Summary { text, truncated, dropped_lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockBackend;
    use crate::sql::parse_sql;

    #[test]
    fn routing_rules() {
        assert_eq!(rule_decision("Which countries had GDP growth greater than 3% in 2019?", true).mode, Mode::Sql);
        assert_eq!(rule_decision("Describe the header layout of this table", true).mode, Mode::Chunk);
        assert_eq!(rule_decision("What is the average revenue?", false).mode, Mode::Chunk);
    }

    #[test]
    fn model_router_validates_reply() {
        let gw = Gateway::new(MockBackend::new().with_entry(Purpose::DecideMode, "", "maybe"));
        let mut b = InvocationBudget::default();
        let d = agent_decision("What is the total?", 0.6, true, Backend::Model, &gw, &mut b);
        assert_eq!((d.mode, d.source, b.decide_mode), (Mode::Sql, Backend::Rule, 1));
        let gw = Gateway::new(MockBackend::new().with_entry(Purpose::DecideMode, "", " CHUNK\n"));
        let d = agent_decision("What is the total?", 0.6, true, Backend::Model, &gw, &mut b);
        assert_eq!((d.mode, d.source), (Mode::Chunk, Backend::Model));
        let d = agent_decision("What is the total?", 2.0, false, Backend::Model, &gw, &mut b);
        assert_eq!((d.mode, b.decide_mode), (Mode::Chunk, 2));
    }

    #[test]
    fn sql_score_example() {
        let ast = parse_sql("SELECT country FROM t WHERE year = 2019 AND gdp_growth > 3").unwrap();
        let q = "Which countries had GDP growth greater than 3% in 2019?";
        assert_eq!(schema_coverage(q, &ast), 1.0);
        let rows = ResultRows {
            columns: vec!["country".into()],
            rows: vec![vec![], vec![]],
            truncated: false,
            source_rows: vec![vec![], vec![]],
        };
        let s: f64 = sql_confidence(q, &ast, &rows, 200, &SqlWeights::default());
        assert!((s - (0.6 + 0.2 + 0.2 * 0.99)).abs() < 1e-12);
        let empty = ResultRows { rows: vec![], source_rows: vec![], ..rows };
        assert_eq!(sql_confidence::<f64>(q, &ast, &empty, 200, &SqlWeights::default()), 0.0);
    }

    #[test]
    fn consistency_penalty() {
        let mut pool = MetaPool::default();
        pool.years.insert(2022);
        assert_eq!(chunk_confidence("Cash in FY2023?", &[0.8, 0.5], &pool, 0.5), 0.4);
        pool.years.insert(2023);
        assert_eq!(chunk_confidence("Cash in FY2023?", &[0.8, 0.5], &pool, 0.5), 0.8);
        assert_eq!(chunk_confidence("Cash in USD millions?", &[0.8], &pool, 0.5), 0.4);
        pool.add_unit("USD (millions)");
        assert_eq!(chunk_confidence("Cash in USD millions?", &[0.8], &pool, 0.5), 0.8);
    }

    #[test]
    fn summaries_drop_fabricated_numbers_and_truncate() {
        let ctx = "r1: cash | 1,200\nr2: debt | 300\n";
        let gw = Gateway::new(MockBackend::new().with_entry(Purpose::Summarize, "", "cash 1,200\ndebt 999\nnote"));
        let mut b = InvocationBudget::default();
        let s = summarize_context(ctx, 100, &gw, &mut b).unwrap();
        assert_eq!(s.text, "cash 1,200\nnote");
        assert_eq!((s.dropped_lines, s.truncated, b.summarize), (1, false, 1));

        let long = (0..50).map(|i| format!("r{i}: value {i}")).collect::<Vec<_>>().join("\n");
        let gw = Gateway::new(MockBackend::standard());
        let s = summarize_context(&long, 20, &gw, &mut b).unwrap();
        assert!(s.truncated);
        assert!(estimate_tokens(&s.text) <= 20);
        assert!(long.starts_with(&s.text));
    }
}
