//! Query pipeline: mode decision, primary attempt, quality gate, alternate
//! path, merge and summarize, answer or abstain.

mod config;
mod gate;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Ablation, Backend, EmbedderConfig, EngineConfig, SqlWeights, MAX_FORWARDED_BLOCKS};
pub use gate::{
    agent_decision, chunk_confidence, rule_decision, schema_coverage, sql_confidence, summarize_context, MetaPool, Mode,
    RoutingDecision, Summary,
};

use crate::chunk::{
    build_blocks, describe, describe_with_model, Block, BlockId, Embedder, IndexError, SegmentConfig, VectorIndex,
};
use crate::grid::{Sheet, Workbook};
use crate::llm::{estimate_tokens, prompts, Gateway, InvocationBudget, LlmError, ModelRequest, Purpose};
use crate::scalar::Scalar;
use crate::sql::{execute, RelationalError, RelationalTable, ResultRows, SqlError, SqlValue, ValidatedSql};
use crate::sqlgen::{generate, GenError, GenerationRequest, GenerationTrace, LlmSqlGenerator, RuleSqlGenerator, SqlGenerator};
use crate::structure::{compute_profile, SheetProfile, StructureError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("index missing: {0}")]
    IndexMissing(String),
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Relational(#[from] RelationalError),
    #[error(transparent)]
    Model(#[from] LlmError),
    #[error(transparent)]
    Generation(#[from] GenError),
}

/// Retrieval caches of one sheet: query text → ranked blocks, validated SQL text → rows.
#[derive(Debug, Default)]
pub struct CacheStore<F> {
    chunks: Mutex<HashMap<String, Vec<(BlockId, F)>>>,
    sql: Mutex<HashMap<String, ResultRows>>,
}

impl<F> CacheStore<F> {
    pub fn len(&self) -> (usize, usize) {
        (self.chunks.lock().unwrap().len(), self.sql.lock().unwrap().len())
    }

    pub fn clear(&self) {
        self.chunks.lock().unwrap().clear();
        self.sql.lock().unwrap().clear();
    }
}

/// Work counters for cache instrumentation.
#[derive(Debug, Default)]
pub struct IndexStats {
    pub embed_calls: AtomicUsize,
    pub sql_executions: AtomicUsize,
}

/// Everything built for one sheet at index time.
#[derive(Debug)]
pub struct SheetIndex<F> {
    pub sheet: Sheet,
    pub profile: SheetProfile<F>,
    pub chunks: VectorIndex<F>,
    /// Present only for Flat sheets (and never under the chunk-only ablation).
    pub relational: Option<RelationalTable>,
    /// Model calls spent on block descriptions.
    pub index_budget: InvocationBudget,
    pub cache: CacheStore<F>,
    pub stats: IndexStats,
}

impl<F: Scalar> SheetIndex<F> {
    pub fn block(&self, id: &BlockId) -> Option<&Block> {
        self.chunks.get(id).map(|e| &e.block)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerStatus {
    Answered,
    Abstained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceOrigin {
    Chunk,
    Sql,
    Merged,
}

/// One sheet row as authored; `cells` are the cells' display text verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub sheet_name: String,
    /// 0-based sheet row.
    pub row: usize,
    /// Block the row was forwarded in, for chunk evidence.
    pub block_id: Option<BlockId>,
    pub cells: Vec<String>,
}

/// Values computed by a query rather than read from cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedResult {
    pub sql: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub origin: Option<EvidenceOrigin>,
    pub items: Vec<EvidenceItem>,
    pub derived: Vec<DerivedResult>,
}

impl EvidenceSet {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty() && self.derived.is_empty()
    }

    /// All display strings: cell texts and derived values.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.items
            .iter()
            .flat_map(|i| i.cells.iter())
            .chain(self.derived.iter().flat_map(|d| d.rows.iter().flatten()))
            .map(String::as_str)
    }

    /// True when `token` occurs verbatim in some evidence string.
    pub fn contains_verbatim(&self, token: &str) -> bool {
        self.texts().any(|t| t.contains(token))
    }

    fn push_row(&mut self, sheet: &Sheet, row: usize, block_id: Option<BlockId>) {
        if self.items.iter().any(|i| i.row == row) {
            return;
        }
        self.items.push(EvidenceItem {
            sheet_name: sheet.name().to_string(),
            row,
            block_id,
            cells: sheet.grid().row(row).iter().map(|c| c.text.clone()).collect(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Decide,
    Sql,
    Chunk,
    Merge,
    Summarize,
    Answer,
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct StageRecord<F> {
    pub stage: Stage,
    /// Gate result for retrieval stages.
    pub passed: Option<bool>,
    pub s_ctx: Option<F>,
    pub detail: String,
}

impl<F> fmt::Display for StageRecord<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self.stage).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        match self.passed {
            Some(true) => write!(f, "{name}-pass"),
            Some(false) => write!(f, "{name}-fail"),
            None => f.write_str(&name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct Answer<F> {
    pub status: AnswerStatus,
    pub answer: Option<String>,
    pub evidence: EvidenceSet,
    pub path_taken: Vec<StageRecord<F>>,
    pub budget: InvocationBudget,
    pub routing: RoutingDecision,
    /// Ranked chunk retrieval (up to `k`), when chunk retrieval ran.
    pub retrieved: Vec<(BlockId, F)>,
    /// Accepted SQL text and the signature of its result.
    pub sql: Option<String>,
    pub sql_signature: Option<String>,
    /// s_ctx of the bundle that was answered from.
    pub confidence: Option<F>,
    pub context_tokens: usize,
    pub context_truncated: bool,
}

impl<F> Answer<F> {
    /// Stage labels such as `["decide", "chunk-fail", "sql-pass", "answer"]`.
    pub fn path_labels(&self) -> Vec<String> {
        self.path_taken.iter().map(|s| s.to_string()).collect()
    }

    pub fn origin(&self) -> Option<EvidenceOrigin> {
        self.evidence.origin
    }
}

/// Chunk-path bundle: forwarded blocks with scores.
struct ChunkBundle<'a, F> {
    blocks: Vec<(&'a Block, F)>,
    ranked: Vec<(BlockId, F)>,
    confidence: F,
}

struct SqlBundle<F> {
    trace: GenerationTrace,
    confidence: F,
}

impl<F> SqlBundle<F> {
    fn accepted(&self) -> Option<(&ValidatedSql, &ResultRows)> {
        Some((self.trace.final_sql.as_ref()?, self.trace.result.as_ref()?))
    }
}

/// The pipeline with its model gateway, embedder and SQL generator.
pub struct Engine<F: Scalar> {
    config: EngineConfig<F>,
    gateway: Arc<Gateway>,
    embedder: Arc<dyn Embedder<F>>,
    generator: Arc<dyn SqlGenerator>,
}

impl<F: Scalar> fmt::Debug for Engine<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("gateway", &self.gateway)
            .field("embedder", &self.embedder.id())
            .finish()
    }
}

impl<F: Scalar> Engine<F> {
    /// Builds the gateway from `config.llm`.
    pub fn from_config(config: EngineConfig<F>) -> Result<Self, EngineError> {
        let gateway = Arc::new(config.llm.build()?);
        Self::new(config, gateway)
    }

    pub fn new(config: EngineConfig<F>, gateway: Arc<Gateway>) -> Result<Self, EngineError> {
        config.validate()?;
        let embedder: Arc<dyn Embedder<F>> = Arc::from(config.embedder.build::<F>());
        let generator: Arc<dyn SqlGenerator> = match config.sql_generator {
            Backend::Rule => Arc::new(RuleSqlGenerator),
            Backend::Model => Arc::new(LlmSqlGenerator { gateway: gateway.clone() }),
        };
        Ok(Engine { config, gateway, embedder, generator })
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder<F>>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn with_generator(mut self, generator: Arc<dyn SqlGenerator>) -> Self {
        self.generator = generator;
        self
    }

    pub fn config(&self) -> &EngineConfig<F> {
        &self.config
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn embedder(&self) -> &dyn Embedder<F> {
        self.embedder.as_ref()
    }

    /// Profiles the sheet, builds the block index, and materializes the
    /// relational view when the sheet is Flat and SQL is enabled.
    pub fn index_sheet(&self, sheet: &Sheet) -> Result<SheetIndex<F>, EngineError> {
        let profile = compute_profile(sheet, &self.config.complexity)?;
        let blocks = build_blocks(sheet, &profile, SegmentConfig { max_block_rows: self.config.max_block_rows });
        let mut index_budget = InvocationBudget::default();
        let descriptions = blocks
            .iter()
            .map(|b| match self.config.describer {
                Backend::Rule => describe(b),
                Backend::Model => describe_with_model(b, &self.gateway, &mut index_budget),
            })
            .collect();
        let chunks = VectorIndex::build(blocks, descriptions, self.embedder.as_ref())?;
        let relational = if profile.is_flat() && self.config.ablation != Ablation::ChunkOnly {
            Some(RelationalTable::from_sheet(sheet, &profile)?)
        } else {
            None
        };
        Ok(SheetIndex {
            sheet: sheet.clone(),
            profile,
            chunks,
            relational,
            index_budget,
            cache: CacheStore { chunks: Mutex::new(HashMap::new()), sql: Mutex::new(HashMap::new()) },
            stats: IndexStats::default(),
        })
    }

    pub fn index_workbook(&self, workbook: &Workbook) -> Result<Vec<SheetIndex<F>>, EngineError> {
        workbook.sheets().iter().map(|s| self.index_sheet(s)).collect()
    }

    fn ranked_blocks(&self, index: &SheetIndex<F>, question: &str) -> Result<Vec<(BlockId, F)>, EngineError> {
        if self.config.cache_enabled {
            if let Some(hit) = index.cache.chunks.lock().unwrap().get(question) {
                return Ok(hit.clone());
            }
        }
        index.stats.embed_calls.fetch_add(1, Ordering::Relaxed);
        let query = self.embedder.embed(question).map_err(IndexError::from)?;
        let ranked: Vec<(BlockId, F)> = index
            .chunks
            .search(&query, self.config.k)?
            .into_iter()
            .map(|(i, s)| (index.chunks.entries()[i].block.block_id.clone(), s))
            .collect();
        if self.config.cache_enabled {
            index.cache.chunks.lock().unwrap().insert(question.to_string(), ranked.clone());
        }
        Ok(ranked)
    }

    fn retrieve_chunks<'a>(&self, index: &'a SheetIndex<F>, question: &str) -> Result<ChunkBundle<'a, F>, EngineError> {
        let ranked = self.ranked_blocks(index, question)?;
        let blocks: Vec<(&Block, F)> = ranked
            .iter()
            .take(self.config.forwarded_k())
            .map(|(id, s)| index.block(id).map(|b| (b, *s)).ok_or_else(|| EngineError::IndexMissing(format!("block {id}"))))
            .collect::<Result<_, _>>()?;
        let pool = MetaPool::from_blocks(blocks.iter().map(|(b, _)| *b));
        let scores: Vec<F> = blocks.iter().map(|(_, s)| *s).collect();
        let confidence = chunk_confidence(question, &scores, &pool, self.config.consistency_penalty);
        Ok(ChunkBundle { blocks, ranked, confidence })
    }

    fn execute_cached(&self, index: &SheetIndex<F>, table: &RelationalTable, sql: &ValidatedSql) -> Result<ResultRows, SqlError> {
        let key = sql.text();
        if self.config.cache_enabled {
            if let Some(hit) = index.cache.sql.lock().unwrap().get(&key) {
                return Ok(hit.clone());
            }
        }
        index.stats.sql_executions.fetch_add(1, Ordering::Relaxed);
        let rows = execute(sql, table)?;
        if self.config.cache_enabled {
            index.cache.sql.lock().unwrap().insert(key, rows.clone());
        }
        Ok(rows)
    }

    fn run_sql(&self, index: &SheetIndex<F>, question: &str, budget: &mut InvocationBudget) -> Result<SqlBundle<F>, EngineError> {
        let table = index
            .relational
            .as_ref()
            .ok_or_else(|| EngineError::IndexMissing(format!("relational view for sheet {:?}", index.sheet.name())))?;
        let request = GenerationRequest {
            question,
            schema: &table.schema,
            sample_rows: table.sample_rows(5),
            max_refinements: self.config.max_refinements,
            row_cap: self.config.row_cap,
        };
        let mut run = |sql: &ValidatedSql| self.execute_cached(index, table, sql);
        let trace = generate(&request, self.generator.as_ref(), &mut run, budget)?;
        let confidence = match (&trace.final_sql, &trace.result) {
            (Some(sql), Some(rows)) => {
                sql_confidence(question, sql.ast(), rows, self.config.row_cap, &self.config.sql_weights)
            }
            _ => F::zero(),
        };
        Ok(SqlBundle { trace, confidence })
    }

    /// Chunk ranking for `question` (top `k`, cached), independent of routing.
    pub fn retrieve(&self, index: &SheetIndex<F>, question: &str) -> Result<Vec<(BlockId, F)>, EngineError> {
        self.ranked_blocks(index, question)
    }

    /// Runs SQL generation alone, independent of routing. `None` on non-flat
    /// sheets or when no query was accepted.
    pub fn probe_sql(&self, index: &SheetIndex<F>, question: &str) -> Result<Option<(String, ResultRows)>, EngineError> {
        if index.relational.is_none() {
            return Ok(None);
        }
        let mut budget = InvocationBudget::default();
        let b = self.run_sql(index, question, &mut budget)?;
        Ok(b.accepted().map(|(q, r)| (q.text(), r.clone())))
    }

    fn passes(&self, s: F) -> bool {
        s >= self.config.theta
    }

    fn render_chunks(bundle: &ChunkBundle<F>) -> String {
        let mut out = String::new();
        for (b, _) in &bundle.blocks {
            out.push_str(&format!("### block {}\n{}", b.block_id, b.render()));
        }
        out
    }

    fn render_sql(bundle: &SqlBundle<F>) -> String {
        let Some((sql, rows)) = bundle.accepted() else {
            return String::new();
        };
        let mut out = format!("### sql\nquery: {sql}\ncolumns: {}\n", rows.columns.join(" | "));
        for r in &rows.rows {
            let cells: Vec<String> = r.iter().map(SqlValue::render).collect();
            out.push_str(&format!("row: {}\n", cells.join(" | ")));
        }
        out
    }

    fn chunk_evidence(index: &SheetIndex<F>, bundle: &ChunkBundle<F>, ev: &mut EvidenceSet) {
        for (b, _) in &bundle.blocks {
            for r in b.header.iter().chain(&b.rows) {
                ev.push_row(&index.sheet, r.row, Some(b.block_id.clone()));
            }
        }
    }

    fn sql_evidence(index: &SheetIndex<F>, bundle: &SqlBundle<F>, ev: &mut EvidenceSet) {
        let Some((sql, rows)) = bundle.accepted() else { return };
        for r in index.profile.header_rows.iter() {
            ev.push_row(&index.sheet, r, None);
        }
        let sources: BTreeSet<usize> = rows.source_rows.iter().flatten().copied().collect();
        for r in sources {
            ev.push_row(&index.sheet, r, None);
        }
        ev.derived.push(DerivedResult {
            sql: sql.text(),
            columns: rows.columns.clone(),
            rows: rows.rows.iter().map(|r| r.iter().map(SqlValue::render).collect()).collect(),
        });
    }

    /// Years and units carried by an accepted SQL result and its source rows.
    fn sql_meta(index: &SheetIndex<F>, bundle: &SqlBundle<F>) -> MetaPool {
        let mut pool = MetaPool::default();
        let (Some((sql, rows)), Some(table)) = (bundle.accepted(), index.relational.as_ref()) else {
            return pool;
        };
        for r in rows.rows.iter().flatten() {
            pool.add_text(&r.render());
        }
        for &r in rows.source_rows.iter().flatten() {
            for c in index.sheet.grid().row(r) {
                pool.add_text(&c.text);
            }
        }
        let referenced = sql.text();
        for c in &table.schema {
            if let Some(u) = &c.unit {
                if referenced.contains(&c.name) {
                    pool.add_unit(u);
                }
            }
        }
        pool
    }

    fn answer(
        &self,
        question: &str,
        ctx: &str,
        budget: &mut InvocationBudget,
    ) -> Result<String, EngineError> {
        let req = ModelRequest::new(Purpose::Answer, prompts::answer_prompt(question, ctx), 128);
        Ok(self.gateway.complete(&req, budget)?.text.trim().to_string())
    }

    /// Answers `question` over one indexed sheet, or abstains.
    pub fn run_query(&self, index: &SheetIndex<F>, question: &str) -> Result<Answer<F>, EngineError> {
        let cfg = &self.config;
        let flat = index.profile.is_flat();
        let mut budget = InvocationBudget::default();
        let mut path: Vec<StageRecord<F>> = Vec::new();
        let record = |path: &mut Vec<StageRecord<F>>, stage, passed, s_ctx, detail: String| {
            path.push(StageRecord { stage, passed, s_ctx, detail })
        };

        let routing = match cfg.ablation {
            Ablation::ChunkOnly => RoutingDecision { mode: Mode::Chunk, rationale: "chunk_only ablation".into(), source: Backend::Rule },
            Ablation::SqlOnly if flat => RoutingDecision { mode: Mode::Sql, rationale: "sql_only ablation".into(), source: Backend::Rule },
            _ => agent_decision(question, index.profile.complexity.to_f64().unwrap_or(0.0), flat, cfg.router, &self.gateway, &mut budget),
        };
        record(&mut path, Stage::Decide, None, None, format!("{:?}: {}", routing.mode, routing.rationale).to_lowercase());

        let mut result = Answer {
            status: AnswerStatus::Abstained,
            answer: None,
            evidence: EvidenceSet::default(),
            path_taken: Vec::new(),
            budget: InvocationBudget::default(),
            routing: routing.clone(),
            retrieved: Vec::new(),
            sql: None,
            sql_signature: None,
            confidence: None,
            context_tokens: 0,
            context_truncated: false,
        };
        let sql_detail = |b: &SqlBundle<F>| match &b.trace.final_sql {
            Some(s) => s.text(),
            None => format!("no accepted query after {} attempt(s)", b.trace.attempts.len()),
        };

        // Primary attempt.
        let mut sql_bundle: Option<SqlBundle<F>> = None;
        if routing.mode == Mode::Sql && flat {
            let b = self.run_sql(index, question, &mut budget)?;
            let pass = self.passes(b.confidence);
            record(&mut path, Stage::Sql, Some(pass), Some(b.confidence), sql_detail(&b));
            if pass {
                let ctx = Self::render_sql(&b);
                Self::sql_evidence(index, &b, &mut result.evidence);
                result.evidence.origin = Some(EvidenceOrigin::Sql);
                return self.finish(result, question, &ctx, b.confidence, false, Some(&b), path, budget);
            }
            sql_bundle = Some(b);
        }
        let mut chunk_bundle: Option<ChunkBundle<F>> = None;
        if cfg.ablation != Ablation::SqlOnly || !flat {
            let b = self.retrieve_chunks(index, question)?;
            result.retrieved = b.ranked.clone();
            let pass = self.passes(b.confidence);
            let ids: Vec<String> = b.blocks.iter().map(|(blk, _)| blk.block_id.to_string()).collect();
            record(&mut path, Stage::Chunk, Some(pass), Some(b.confidence), ids.join(", "));
            if pass {
                let ctx = Self::render_chunks(&b);
                Self::chunk_evidence(index, &b, &mut result.evidence);
                result.evidence.origin = Some(EvidenceOrigin::Chunk);
                return self.finish(result, question, &ctx, b.confidence, false, None, path, budget);
            }
            chunk_bundle = Some(b);
        }

        // Alternate path and merge, Flat sheets only.
        let fallback = cfg.ablation != Ablation::NoFallback && cfg.ablation != Ablation::ChunkOnly;
        if fallback && flat {
            if routing.mode == Mode::Chunk {
                let b = self.run_sql(index, question, &mut budget)?;
                let pass = self.passes(b.confidence);
                record(&mut path, Stage::Sql, Some(pass), Some(b.confidence), sql_detail(&b));
                if pass {
                    let ctx = Self::render_sql(&b);
                    Self::sql_evidence(index, &b, &mut result.evidence);
                    result.evidence.origin = Some(EvidenceOrigin::Sql);
                    return self.finish(result, question, &ctx, b.confidence, false, Some(&b), path, budget);
                }
                sql_bundle = Some(b);
            }
            if let (Some(c), Some(r)) = (&chunk_bundle, &sql_bundle) {
                let mut pool = MetaPool::from_blocks(c.blocks.iter().map(|(b, _)| *b));
                pool.extend(&Self::sql_meta(index, r));
                let scores: Vec<F> = c.blocks.iter().map(|(_, s)| *s).collect();
                let chunk_part = chunk_confidence(question, &scores, &pool, cfg.consistency_penalty);
                let s = chunk_part.max(r.confidence);
                let mut ctx = Self::render_chunks(c) + &Self::render_sql(r);
                let mut truncated = false;
                let tokens = estimate_tokens(&ctx);
                if tokens > cfg.token_budget {
                    let summary = summarize_context(&ctx, cfg.token_budget, &self.gateway, &mut budget)?;
                    record(
                        &mut path,
                        Stage::Summarize,
                        None,
                        None,
                        format!("{tokens} -> {} tokens, {} line(s) dropped", estimate_tokens(&summary.text), summary.dropped_lines),
                    );
                    ctx = summary.text;
                    truncated = summary.truncated;
                }
                let pass = self.passes(s);
                record(&mut path, Stage::Merge, Some(pass), Some(s), format!("chunk {chunk_part}, sql {}", r.confidence));
                if pass {
                    Self::chunk_evidence(index, c, &mut result.evidence);
                    Self::sql_evidence(index, r, &mut result.evidence);
                    result.evidence.origin = Some(EvidenceOrigin::Merged);
                    return self.finish(result, question, &ctx, s, truncated, Some(r), path, budget);
                }
            }
        }

        record(&mut path, Stage::Abstain, None, None, "no bundle reached theta".into());
        result.path_taken = path;
        result.budget = budget;
        Ok(result)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        mut result: Answer<F>,
        question: &str,
        ctx: &str,
        confidence: F,
        truncated: bool,
        sql: Option<&SqlBundle<F>>,
        mut path: Vec<StageRecord<F>>,
        mut budget: InvocationBudget,
    ) -> Result<Answer<F>, EngineError> {
        let text = self.answer(question, ctx, &mut budget)?;
        path.push(StageRecord { stage: Stage::Answer, passed: None, s_ctx: None, detail: text.clone() });
        if let Some((q, rows)) = sql.and_then(SqlBundle::accepted) {
            result.sql = Some(q.text());
            result.sql_signature = Some(rows.signature());
        }
        result.status = AnswerStatus::Answered;
        result.answer = Some(text);
        result.confidence = Some(confidence);
        result.context_tokens = estimate_tokens(ctx);
        result.context_truncated = truncated;
        result.path_taken = path;
        result.budget = budget;
        Ok(result)
    }
}
