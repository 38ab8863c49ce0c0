use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::chunk::{Embedder, HashingEmbedder, HttpEmbedder, DEFAULT_MAX_BLOCK_ROWS};
use crate::llm::LlmConfig;
use crate::scalar::Scalar;
use crate::sql::DEFAULT_ROW_CAP;
use crate::structure::ComplexityConfig;

/// Number of blocks ever forwarded to the answer model.
pub const MAX_FORWARDED_BLOCKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    NoFallback,
    ChunkOnly,
    SqlOnly,
}

impl Ablation {
    /// Report order for ablation tables.
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoFallback, Ablation::ChunkOnly, Ablation::SqlOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoFallback => "no_fallback",
            Ablation::ChunkOnly => "chunk_only",
            Ablation::SqlOnly => "sql_only",
        }
    }

    /// Display name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Ablation::Full => "Full",
            Ablation::NoFallback => "No Fallback",
            Ablation::ChunkOnly => "Chunk-only",
            Ablation::SqlOnly => "SQL-only",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown ablation {s:?} (expected full, no_fallback, chunk_only or sql_only)"))
    }
}

/// Which component makes a decision: deterministic rules or the model gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Rule,
    Model,
}

/// Weights of the SQL confidence heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "F: Scalar"))]
pub struct SqlWeights<F> {
    pub base: F,
    pub coverage: F,
    pub selectivity: F,
}

impl<F: Scalar> Default for SqlWeights<F> {
    fn default() -> Self {
        SqlWeights { base: F::lit(0.6), coverage: F::lit(0.2), selectivity: F::lit(0.2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Hashing { dim: usize, seed: u64 },
    Http { endpoint: String, model: String, auth_token_env: Option<String>, timeout_secs: u64 },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        let h = HashingEmbedder::default();
        EmbedderConfig::Hashing { dim: h.dim, seed: h.seed }
    }
}

impl EmbedderConfig {
    pub fn build<F: Scalar>(&self) -> Box<dyn Embedder<F>> {
        match self {
            EmbedderConfig::Hashing { dim, seed } => Box::new(HashingEmbedder::new(*dim, *seed)),
            EmbedderConfig::Http { endpoint, model, auth_token_env, timeout_secs } => Box::new(HttpEmbedder {
                endpoint: endpoint.clone(),
                model: model.clone(),
                auth_token: auth_token_env.as_ref().and_then(|v| std::env::var(v).ok()),
                timeout: Duration::from_secs(*timeout_secs),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "F: Scalar"))]
pub struct EngineConfig<F> {
    /// Blocks retrieved per query; at most three are forwarded.
    pub k: usize,
    /// Quality-gate threshold. Calibrate by sweeping 0.2–0.6 on a dev split
    /// and keeping the value with the best exact match.
    pub theta: F,
    /// Context token budget before summarization.
    pub token_budget: usize,
    pub ablation: Ablation,
    pub complexity: ComplexityConfig<F>,
    pub row_cap: usize,
    pub max_refinements: usize,
    pub max_block_rows: usize,
    /// Multiplier applied to chunk confidence when a question year or unit is
    /// absent from the forwarded blocks' metadata.
    pub consistency_penalty: F,
    pub sql_weights: SqlWeights<F>,
    pub cache_enabled: bool,
    pub router: Backend,
    pub describer: Backend,
    pub sql_generator: Backend,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
}

impl<F: Scalar> Default for EngineConfig<F> {
    fn default() -> Self {
        EngineConfig {
            k: 3,
            theta: F::lit(0.35),
            token_budget: 3000,
            ablation: Ablation::Full,
            complexity: ComplexityConfig::default(),
            row_cap: DEFAULT_ROW_CAP,
            max_refinements: 2,
            max_block_rows: DEFAULT_MAX_BLOCK_ROWS,
            consistency_penalty: F::lit(0.5),
            sql_weights: SqlWeights::default(),
            cache_enabled: true,
            router: Backend::Rule,
            describer: Backend::Rule,
            sql_generator: Backend::Rule,
            embedder: EmbedderConfig::default(),
            llm: LlmConfig::default(),
        }
    }
}

impl<F: Scalar> EngineConfig<F> {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(self.theta > F::zero() && self.theta < F::one()) {
            return bad("theta must lie in (0, 1)");
        }
        if self.token_budget == 0 {
            return bad("token_budget must be positive");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(1..=2).contains(&self.max_refinements) {
            return bad("max_refinements must be 1 or 2");
        }
        if self.row_cap == 0 || self.max_block_rows == 0 {
            return bad("row_cap and max_block_rows must be positive");
        }
        if !(self.consistency_penalty >= F::zero() && self.consistency_penalty <= F::one()) {
            return bad("consistency_penalty must lie in [0, 1]");
        }
        self.complexity.validate().map_err(|e| EngineError::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; a relative `llm.mock_script` resolves against the file's directory.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(script), Some(dir)) = (&cfg.llm.mock_script, path.parent()) {
            if script.is_relative() {
                cfg.llm.mock_script = Some(PathBuf::from(dir).join(script));
            }
        }
        Ok(cfg)
    }

    /// Blocks forwarded to the answer model.
    pub fn forwarded_k(&self) -> usize {
        self.k.min(MAX_FORWARDED_BLOCKS)
    }
}
