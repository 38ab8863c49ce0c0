//! Question → constrained SQL, with a bounded refinement loop.

use std::collections::HashSet;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::llm::{Gateway, InvocationBudget, LlmError, ModelRequest, Purpose};
use crate::sql::{
    parse_sql, validate, AggFn, CmpOp, ColumnSchema, ColumnType, Expr, Literal, OrderKey, OrderTarget, ResultRows,
    SelectItem, SqlAst, SqlError, SqlValue, ValidatedSql,
};
use crate::text::{content_words, extract_years, parse_number, stem, words};

/// Returned by the rule generator when no pattern applies.
pub const NO_MATCH: &str = "NO_MATCH";
/// Sentence appended to every LLM generation prompt.
pub const GRAMMAR_RESTRICTION: &str = "Write exactly one read-only query over table t using only \
SELECT, FROM, WHERE, GROUP BY, ORDER BY and LIMIT; no joins, subqueries or other tables. Return only the SQL.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("SQL generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error(transparent)]
    Model(LlmError),
    #[error("generation request has an empty schema")]
    EmptySchema,
}

impl From<LlmError> for GenError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::BackendUnavailable(m) => GenError::GeneratorUnavailable(m),
            other => GenError::Model(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub question: &'a str,
    pub schema: &'a [ColumnSchema],
    /// At most five type-coerced rows.
    pub sample_rows: Vec<Vec<SqlValue>>,
    /// 1 or 2 extra attempts after the first proposal.
    pub max_refinements: usize,
    pub row_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    ParseError,
    ValidationError,
    EmptyResult,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub sql_text: String,
    pub outcome: AttemptOutcome,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationTrace {
    pub attempts: Vec<Attempt>,
    #[serde(rename = "final")]
    pub final_sql: Option<ValidatedSql>,
    #[serde(skip)]
    pub result: Option<ResultRows>,
}

impl GenerationTrace {
    pub fn accepted(&self) -> bool {
        self.final_sql.is_some()
    }
}

/// Source of SQL proposals. `attempt` is 0 for the first proposal;
/// `feedback` carries the previous failure.
pub trait SqlGenerator: Send + Sync {
    fn propose(
        &self,
        request: &GenerationRequest,
        attempt: usize,
        feedback: Option<&str>,
        budget: &mut InvocationBudget,
    ) -> Result<String, GenError>;
}

/// Proposes, validates and runs queries until one returns rows or
/// `1 + max_refinements` attempts are spent. Nothing reaches `run` without
/// passing `parse_sql` and `validate`.
pub fn generate(
    request: &GenerationRequest,
    generator: &dyn SqlGenerator,
    run: &mut dyn FnMut(&ValidatedSql) -> Result<ResultRows, SqlError>,
    budget: &mut InvocationBudget,
) -> Result<GenerationTrace, GenError> {
    if request.schema.is_empty() {
        return Err(GenError::EmptySchema);
    }
    let mut trace = GenerationTrace { attempts: Vec::new(), final_sql: None, result: None };
    let mut feedback: Option<String> = None;
    for attempt in 0..=request.max_refinements {
        let text = generator.propose(request, attempt, feedback.as_deref(), budget)?;
        let text = text.trim().to_string();
        if text == NO_MATCH {
            trace.attempts.push(Attempt {
                sql_text: text,
                outcome: AttemptOutcome::ParseError,
                error: Some("no query pattern matched the question".into()),
            });
            break;
        }
        let fail = |outcome, e: String| Attempt { sql_text: text.clone(), outcome, error: Some(e) };
        let ast = match parse_sql(&text) {
            Ok(ast) => ast,
            Err(e) => {
                feedback = Some(e.to_string());
                trace.attempts.push(fail(AttemptOutcome::ParseError, e.to_string()));
                continue;
            }
        };
        let validated = match validate(ast, request.schema, request.row_cap) {
            Ok(v) => v,
            Err(e) => {
                feedback = Some(e.to_string());
                trace.attempts.push(fail(AttemptOutcome::ValidationError, e.to_string()));
                continue;
            }
        };
        match run(&validated) {
            Err(e) => {
                feedback = Some(e.to_string());
                trace.attempts.push(fail(AttemptOutcome::ValidationError, e.to_string()));
            }
            Ok(rows) if rows.is_empty() => {
                let msg = "the query returned no rows".to_string();
                feedback = Some(msg.clone());
                trace.attempts.push(fail(AttemptOutcome::EmptyResult, msg));
            }
            Ok(rows) => {
                trace.attempts.push(Attempt { sql_text: text, outcome: AttemptOutcome::Accepted, error: None });
                trace.final_sql = Some(validated);
                trace.result = Some(rows);
                break;
            }
        }
    }
    Ok(trace)
}

/// Generation prompt: schema lines `name:type[:unit]`, sample rows, the
/// question and the grammar restriction.
pub fn generation_prompt(request: &GenerationRequest) -> String {
    let mut p = String::from("Schema of table t:\n");
    for c in request.schema {
        p.push_str(&format!("{}:{}", c.name, c.col_type));
        if let Some(u) = &c.unit {
            p.push_str(&format!(":{u}"));
        }
        p.push('\n');
    }
    p.push_str("Sample rows:\n");
    let names: Vec<&str> = request.schema.iter().map(|c| c.name.as_str()).collect();
    p.push_str(&names.join(" | "));
    p.push('\n');
    for r in request.sample_rows.iter().take(5) {
        let cells: Vec<String> = r.iter().map(SqlValue::render).collect();
        p.push_str(&cells.join(" | "));
        p.push('\n');
    }
    p.push_str(&format!("Question: {}\n{GRAMMAR_RESTRICTION}", request.question));
    p
}

/// Strips code fences and a leading `sql` tag from a model reply.
fn extract_sql(reply: &str) -> String {
    let t = reply.trim();
    let t = t.strip_prefix("```sql").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    let t = t.strip_suffix("```").unwrap_or(t);
    t.trim().to_string()
}

/// Model-backed generator; each proposal is one `generate_sql` call.
#[derive(Debug, Clone)]
pub struct LlmSqlGenerator {
    pub gateway: Arc<Gateway>,
}

impl SqlGenerator for LlmSqlGenerator {
    fn propose(
        &self,
        request: &GenerationRequest,
        attempt: usize,
        feedback: Option<&str>,
        budget: &mut InvocationBudget,
    ) -> Result<String, GenError> {
        let mut prompt = generation_prompt(request);
        if attempt > 0 {
            if let Some(err) = feedback {
                prompt.push_str(&format!("\nYour previous query failed: {err}. Produce a corrected query."));
            }
        }
        let resp = self.gateway.complete(&ModelRequest::new(Purpose::GenerateSql, prompt, 256), budget)?;
        Ok(extract_sql(&resp.text))
    }
}

static COMPARATOR_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(greater than or equal to|less than or equal to|greater than|more than|higher than|larger than|above|over|exceeding|exceeded|at least|less than|lower than|smaller than|fewer than|below|under|at most)\s+(-?[\d,]*\.?\d+)",
    )
    .unwrap()
});
static AGG_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(average|mean|total|sum|minimum|lowest|smallest|maximum|highest|largest|how many|number of)\b").unwrap()
});
static RANGE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:from|between)\s+(?:FY\s?)?(\d{4})\s+(?:to|and|through|until)\s+(?:FY\s?)?(\d{4})\b").unwrap());
static WHICH_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:which|what)\s+([a-z]+)").unwrap());
static QUOTED_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"'([^']+)'|"([^"]+)""#).unwrap());
static CAPS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Z][\w&'.-]*(?:\s+(?:[A-Z][\w&'.-]*|\d+(?:\b|$)))*").unwrap());

const QUESTION_WORDS: &[&str] = &["what", "which", "how", "who", "when", "where", "list", "give", "show", "tell", "is", "was", "in", "for"];

fn comparator(phrase: &str) -> CmpOp {
    let p = phrase.to_ascii_lowercase();
    if p.contains("or equal") {
        if p.starts_with("greater") { CmpOp::Ge } else { CmpOp::Le }
    } else if p == "at least" {
        CmpOp::Ge
    } else if p == "at most" {
        CmpOp::Le
    } else if ["less", "lower", "smaller", "fewer", "below", "under"].iter().any(|w| p.starts_with(w)) {
        CmpOp::Lt
    } else {
        CmpOp::Gt
    }
}

fn number_literal(text: &str) -> Option<Literal> {
    let v = parse_number(text)?;
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Some(Literal::Int(v as i64))
    } else {
        Some(Literal::Real(v))
    }
}

/// Deterministic pattern matcher over the three question tiers: direct
/// lookups, range aggregates and comparative filters. Each proposal counts as
/// one `generate_sql` invocation; refinements walk a fixed candidate list.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSqlGenerator;

struct Analysis<'a> {
    question: &'a str,
    stems: HashSet<String>,
    schema: &'a [ColumnSchema],
    samples: &'a [Vec<SqlValue>],
}

impl<'a> Analysis<'a> {
    fn col_tokens(c: &ColumnSchema) -> HashSet<String> {
        let mut t: HashSet<String> = c.name.split('_').filter(|s| !s.is_empty()).map(stem).collect();
        t.extend(words(&c.original_label).iter().map(|w| stem(w)));
        t
    }

    fn overlap(&self, c: &ColumnSchema) -> usize {
        c.name.split('_').filter(|s| !s.is_empty()).filter(|s| self.stems.contains(&stem(s))).count()
    }

    /// Columns of the accepted types ranked by name-token overlap, ties alphabetical.
    fn ranked(&self, accept: impl Fn(&ColumnSchema) -> bool) -> Vec<(&'a ColumnSchema, usize)> {
        let mut v: Vec<(&ColumnSchema, usize)> =
            self.schema.iter().filter(|c| accept(c)).map(|c| (c, self.overlap(c))).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name.cmp(&b.0.name)));
        v
    }

    fn year_column(&self) -> Option<&'a ColumnSchema> {
        let named = self.schema.iter().find(|c| {
            c.col_type.is_numeric() && c.name.split('_').any(|t| matches!(t, "year" | "yr" | "fy" | "years"))
        });
        named.or_else(|| {
            self.schema.iter().enumerate().find_map(|(j, c)| {
                let yearish = c.col_type == ColumnType::Integer
                    && !self.samples.is_empty()
                    && self.samples.iter().all(|r| matches!(r.get(j), Some(SqlValue::Int(y)) if (1900..=2100).contains(y)));
                yearish.then_some(c)
            })
        })
    }

    fn text_columns(&self) -> Vec<(usize, &'a ColumnSchema)> {
        self.schema.iter().enumerate().filter(|(_, c)| c.col_type == ColumnType::Text).collect()
    }

    /// Quoted text, else capitalized spans that are neither question words nor column words.
    fn entities(&self) -> Vec<String> {
        let quoted: Vec<String> = QUOTED_RE
            .captures_iter(self.question)
            .filter_map(|c| c.get(1).or_else(|| c.get(2)).map(|m| m.as_str().to_string()))
            .collect();
        if !quoted.is_empty() {
            return quoted;
        }
        let col_words: HashSet<String> = self.schema.iter().flat_map(Self::col_tokens).collect();
        let mut out = Vec::new();
        for m in CAPS_RE.find_iter(self.question) {
            let mut toks: Vec<&str> = m.as_str().split_whitespace().collect();
            while toks.first().is_some_and(|t| QUESTION_WORDS.contains(&t.to_ascii_lowercase().as_str())) {
                toks.remove(0);
            }
            while toks.last().is_some_and(|t| extract_years(t).len() == 1 && t.len() <= 6) {
                toks.pop();
            }
            if toks.is_empty() {
                continue;
            }
            let span = toks.join(" ").trim_end_matches(['.', '?']).to_string();
            let all_column_words = words(&span).iter().all(|w| col_words.contains(&stem(w)));
            if !all_column_words || toks.len() > 1 && self.matching_text_column(&span).is_some_and(|(_, exact)| exact) {
                out.push(span);
            }
        }
        out
    }

    /// Text column whose sample values best resemble `entity`; the flag tells
    /// whether a sample equals it exactly.
    fn matching_text_column(&self, entity: &str) -> Option<(&'a ColumnSchema, bool)> {
        let ent: HashSet<String> = words(entity).into_iter().collect();
        let mut best: Option<(&ColumnSchema, usize, bool)> = None;
        for (j, c) in self.text_columns() {
            let mut score = 0;
            let mut exact = false;
            for r in self.samples {
                if let Some(SqlValue::Text(s)) = r.get(j) {
                    if s.eq_ignore_ascii_case(entity) {
                        exact = true;
                    }
                    score += words(s).iter().filter(|w| ent.contains(*w)).count();
                }
            }
            let key = score + if exact { 1000 } else { 0 };
            if best.is_none_or(|b| key > b.1) {
                best = Some((c, key, exact));
            }
        }
        best.map(|(c, _, e)| (c, e))
    }

    fn entity_column(&self, entity: &str) -> Option<&'a ColumnSchema> {
        self.matching_text_column(entity).map(|(c, _)| c)
    }

    /// Text column named by "which <noun>", else the best-overlap text column.
    fn answer_column(&self) -> Option<&'a ColumnSchema> {
        if let Some(noun) = WHICH_RE.captures(self.question).map(|c| stem(&c[1].to_ascii_lowercase())) {
            if let Some((_, c)) = self.text_columns().into_iter().find(|(_, c)| Self::col_tokens(c).contains(&noun)) {
                return Some(c);
            }
        }
        self.ranked(|c| c.col_type == ColumnType::Text).first().map(|(c, _)| *c)
    }
}

fn and_all(preds: Vec<Expr>) -> Option<Expr> {
    preds.into_iter().reduce(|a, b| Expr::And(Box::new(a), Box::new(b)))
}

fn select(projections: Vec<SelectItem>, preds: Vec<Expr>) -> SqlAst {
    SqlAst { projections, where_clause: and_all(preds), group_by: vec![], order_by: vec![], limit: None }
}

impl RuleSqlGenerator {
    /// Candidate queries in priority order; empty when no pattern applies.
    pub fn candidates(&self, question: &str, schema: &[ColumnSchema], samples: &[Vec<SqlValue>]) -> Vec<String> {
        let a = Analysis {
            question,
            stems: content_words(question).iter().map(|w| stem(w)).collect(),
            schema,
            samples,
        };
        let year_col = a.year_column();
        let metrics: Vec<&ColumnSchema> = a
            .ranked(|c| c.col_type.is_numeric() && year_col.is_none_or(|y| y.name != c.name))
            .into_iter()
            .filter(|(_, score)| *score > 0)
            .map(|(c, _)| c)
            .collect();
        let years: Vec<i64> = extract_years(question).iter().map(|y| i64::from(y.year)).collect();
        let range = RANGE_RE.captures(question).map(|c| (c[1].parse::<i64>().unwrap(), c[2].parse::<i64>().unwrap()));
        let entities = a.entities();
        let lower = question.to_ascii_lowercase();

        let year_pred = |ranged: bool| -> Option<Expr> {
            let y = year_col?;
            match (range, years.as_slice()) {
                (Some((lo, hi)), _) if ranged => Some(Expr::Between {
                    column: y.name.clone(),
                    low: Literal::Int(lo.min(hi)),
                    high: Literal::Int(lo.max(hi)),
                    negated: false,
                }),
                (_, [single]) => Some(Expr::Cmp { column: y.name.clone(), op: CmpOp::Eq, value: Literal::Int(*single) }),
                _ => None,
            }
        };
        let entity_preds = |like: bool| -> Vec<Expr> {
            entities
                .iter()
                .filter_map(|e| {
                    let c = a.entity_column(e)?;
                    Some(if like {
                        Expr::Like { column: c.name.clone(), pattern: format!("%{e}%"), negated: false }
                    } else {
                        Expr::Cmp { column: c.name.clone(), op: CmpOp::Eq, value: Literal::Text(e.clone()) }
                    })
                })
                .collect()
        };

        let mut out: Vec<SqlAst> = Vec::new();
        let comparative = COMPARATOR_RE.captures(question);
        let agg = AGG_RE.captures(question).map(|c| c[1].to_ascii_lowercase());
        let counting = lower.contains("how many") || lower.contains("number of");
        let asks_which = lower.starts_with("which")
            || (lower.starts_with("what ") && WHICH_RE.is_match(question) && !lower.starts_with("what was") && !lower.starts_with("what is"));

        if let Some(cap) = comparative {
            let op = comparator(&cap[1]);
            let Some(value) = number_literal(&cap[2]) else { return vec![] };
            for (mi, metric) in metrics.iter().take(2).enumerate() {
                let mut preds = entity_preds(false);
                preds.extend(year_pred(range.is_some()));
                preds.push(Expr::Cmp { column: metric.name.clone(), op, value: value.clone() });
                let proj = if counting {
                    vec![SelectItem::Aggregate { func: AggFn::Count, arg: None, alias: None }]
                } else {
                    match a.answer_column() {
                        Some(c) => vec![SelectItem::Column { name: c.name.clone(), alias: None }],
                        None => return vec![],
                    }
                };
                out.push(select(proj, preds));
                if mi == 0 && !entities.is_empty() {
                    let mut preds = entity_preds(true);
                    preds.extend(year_pred(range.is_some()));
                    preds.push(Expr::Cmp { column: metric.name.clone(), op, value: value.clone() });
                    out.push(select(out[0].projections.clone(), preds));
                }
            }
        } else if let Some(word) = agg {
            let superlative = matches!(word.as_str(), "highest" | "largest" | "lowest" | "smallest");
            if superlative && asks_which {
                // "Which country had the highest X in 2019?"
                let Some(ans) = a.answer_column() else { return vec![] };
                for metric in metrics.iter().take(2) {
                    let mut preds = entity_preds(false);
                    preds.extend(year_pred(range.is_some()));
                    let mut ast = select(vec![SelectItem::Column { name: ans.name.clone(), alias: None }], preds);
                    ast.order_by = vec![OrderKey {
                        target: OrderTarget::Column(metric.name.clone()),
                        descending: matches!(word.as_str(), "highest" | "largest"),
                    }];
                    ast.limit = Some(1);
                    out.push(ast);
                }
            } else if counting {
                let mut preds = entity_preds(false);
                preds.extend(year_pred(true));
                out.push(select(vec![SelectItem::Aggregate { func: AggFn::Count, arg: None, alias: None }], preds));
            } else {
                let func = match word.as_str() {
                    "average" | "mean" => AggFn::Avg,
                    "total" | "sum" => AggFn::Sum,
                    "minimum" | "lowest" | "smallest" => AggFn::Min,
                    _ => AggFn::Max,
                };
                for (mi, metric) in metrics.iter().take(2).enumerate() {
                    for like in [false, true] {
                        if like && (mi > 0 || entities.is_empty()) {
                            continue;
                        }
                        let mut preds = entity_preds(like);
                        preds.extend(year_pred(true));
                        let proj = SelectItem::Aggregate { func, arg: Some(metric.name.clone()), alias: None };
                        out.push(select(vec![proj], preds));
                    }
                }
            }
        } else if !entities.is_empty() || !years.is_empty() {
            for (mi, metric) in metrics.iter().take(2).enumerate() {
                for like in [false, true] {
                    if like && (mi > 0 || entities.is_empty()) {
                        continue;
                    }
                    let mut preds = entity_preds(like);
                    preds.extend(year_pred(false));
                    if preds.is_empty() {
                        continue;
                    }
                    out.push(select(vec![SelectItem::Column { name: metric.name.clone(), alias: None }], preds));
                }
            }
        }
        let mut seen = HashSet::new();
        out.into_iter().map(|ast| ast.to_string()).filter(|s| seen.insert(s.clone())).collect()
    }
}

impl SqlGenerator for RuleSqlGenerator {
    fn propose(
        &self,
        request: &GenerationRequest,
        attempt: usize,
        _feedback: Option<&str>,
        budget: &mut InvocationBudget,
    ) -> Result<String, GenError> {
        budget.record(Purpose::GenerateSql);
        let candidates = self.candidates(request.question, request.schema, &request.sample_rows);
        Ok(candidates.into_iter().nth(attempt).unwrap_or_else(|| NO_MATCH.to_string()))
    }
}
