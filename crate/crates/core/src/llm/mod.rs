//! Uniform model client: every routing, description, SQL, summary and answer
//! call goes through [`Gateway::complete`], which logs it and charges the
//! caller's per-query [`InvocationBudget`].

mod extractive;
mod http;
mod mock;
pub mod prompts;

use std::fmt;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extractive::extractive_answer;
pub use http::HttpBackend;
pub use mock::{MockBackend, Responder, ScriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    DecideMode,
    Describe,
    GenerateSql,
    Summarize,
    Answer,
}

impl Purpose {
    pub const ALL: [Purpose; 5] = [
        Purpose::DecideMode,
        Purpose::Describe,
        Purpose::GenerateSql,
        Purpose::Summarize,
        Purpose::Answer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Purpose::DecideMode => "decide_mode",
            Purpose::Describe => "describe",
            Purpose::GenerateSql => "generate_sql",
            Purpose::Summarize => "summarize",
            Purpose::Answer => "answer",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("model backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("mock script has no response for {purpose} (prompt starts {prompt_head:?})")]
    ScriptMiss { purpose: Purpose, prompt_head: String },
    #[error("invalid mock script: {0}")]
    InvalidScript(String),
}

/// A completion request. Sampling temperature is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRequest {
    pub purpose: Purpose,
    pub prompt: String,
    pub max_tokens: usize,
    temperature: f32,
}

impl ModelRequest {
    pub fn new(purpose: Purpose, prompt: impl Into<String>, max_tokens: usize) -> Self {
        ModelRequest { purpose, prompt: prompt.into(), max_tokens, temperature: 0.0 }
    }

    pub fn temperature(&self) -> f32 {
        self.temperature
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub token_count: usize,
    pub latency_ms: u64,
}

/// Whitespace-token count scaled by 1.3, rounded up; used whenever a backend
/// does not report usage.
pub fn estimate_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 13).div_ceil(10)
}

/// Per-query model call counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationBudget {
    pub decide_mode: usize,
    pub describe: usize,
    pub generate_sql: usize,
    pub summarize: usize,
    pub answer: usize,
}

impl InvocationBudget {
    pub fn record(&mut self, purpose: Purpose) {
        *self.slot(purpose) += 1;
    }

    pub fn get(&self, purpose: Purpose) -> usize {
        match purpose {
            Purpose::DecideMode => self.decide_mode,
            Purpose::Describe => self.describe,
            Purpose::GenerateSql => self.generate_sql,
            Purpose::Summarize => self.summarize,
            Purpose::Answer => self.answer,
        }
    }

    fn slot(&mut self, purpose: Purpose) -> &mut usize {
        match purpose {
            Purpose::DecideMode => &mut self.decide_mode,
            Purpose::Describe => &mut self.describe,
            Purpose::GenerateSql => &mut self.generate_sql,
            Purpose::Summarize => &mut self.summarize,
            Purpose::Answer => &mut self.answer,
        }
    }

    pub fn total(&self) -> usize {
        Purpose::ALL.iter().map(|&p| self.get(p)).sum()
    }
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, LlmError>;
}

/// One logged gateway call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub purpose: Purpose,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

pub struct Gateway {
    backend: Box<dyn ModelBackend>,
    retry_backoff: Duration,
    log: Mutex<Vec<CallRecord>>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("backend", &self.backend.name()).finish()
    }
}

impl Gateway {
    pub fn new(backend: impl ModelBackend + 'static) -> Self {
        Gateway {
            backend: Box::new(backend),
            retry_backoff: Duration::from_millis(250),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_retry_backoff(mut self, backoff: Duration) -> Self {
        self.retry_backoff = backoff;
        self
    }

    pub fn backend_name(&self) -> String {
        self.backend.name()
    }

    /// Sends one request, retrying a transport failure once after the
    /// backoff. The budget is charged once per call regardless of outcome.
    pub fn complete(&self, request: &ModelRequest, budget: &mut InvocationBudget) -> Result<ModelResponse, LlmError> {
        budget.record(request.purpose);
        let started = Instant::now();
        let mut result = self.backend.complete(request);
        if matches!(result, Err(LlmError::BackendUnavailable(_))) {
            std::thread::sleep(self.retry_backoff);
            result = self.backend.complete(request);
        }
        let result = result.map(|mut r| {
            if r.latency_ms == 0 {
                r.latency_ms = started.elapsed().as_millis() as u64;
            }
            r
        });
        self.log.lock().unwrap().push(CallRecord {
            purpose: request.purpose,
            prompt: request.prompt.clone(),
            response: result.as_ref().ok().map(|r| r.text.clone()),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
        result
    }

    pub fn log(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

/// Gateway settings as read from the engine config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
    pub timeout_secs: u64,
    pub mock_script: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: BackendKind::Mock,
            endpoint: None,
            model: "local".into(),
            auth_token_env: None,
            timeout_secs: 60,
            mock_script: None,
        }
    }
}

impl LlmConfig {
    pub fn build(&self) -> Result<Gateway, LlmError> {
        match self.backend {
            BackendKind::Mock => {
                let mock = match &self.mock_script {
                    Some(p) => MockBackend::from_script_file(p)?,
                    None => MockBackend::new(),
                };
                Ok(Gateway::new(mock.with_standard_defaults()))
            }
            BackendKind::Http => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| LlmError::BackendUnavailable("http backend needs an endpoint".into()))?;
                let auth_token = self.auth_token_env.as_ref().and_then(|v| std::env::var(v).ok());
                Ok(Gateway::new(HttpBackend {
                    endpoint,
                    model: self.model.clone(),
                    auth_token,
                    timeout: Duration::from_secs(self.timeout_secs),
                }))
            }
        }
    }
}
