use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{estimate_tokens, extractive_answer, prompts, LlmError, ModelBackend, ModelRequest, ModelResponse, Purpose};

/// Computes a default response for a purpose when no script entry matches.
pub type Responder = Arc<dyn Fn(&ModelRequest) -> String + Send + Sync>;

/// One line of a mock script file: the first entry whose purpose matches and
/// whose `prompt_contains` is a substring of the prompt wins.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScriptEntry {
    pub purpose: Purpose,
    #[serde(default)]
    pub prompt_contains: String,
    pub response: String,
}

/// Scripted, fully deterministic model backend.
#[derive(Clone, Default)]
pub struct MockBackend {
    exact: HashMap<(Purpose, String), String>,
    entries: Vec<ScriptEntry>,
    defaults: HashMap<Purpose, Responder>,
}

impl fmt::Debug for MockBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockBackend")
            .field("exact", &self.exact.len())
            .field("entries", &self.entries)
            .field("defaults", &self.defaults.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script_json(json: &str) -> Result<Self, LlmError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(json).map_err(|e| LlmError::InvalidScript(e.to_string()))?;
        Ok(MockBackend { entries, ..Self::default() })
    }

    pub fn from_script_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidScript(format!("{}: {e}", path.display())))?;
        Self::from_script_json(&text)
    }

    /// Response for exactly this prompt (matched by SHA-256 of the prompt).
    pub fn with_exact(mut self, purpose: Purpose, prompt: &str, response: impl Into<String>) -> Self {
        self.exact.insert((purpose, prompt_hash(prompt)), response.into());
        self
    }

    pub fn with_entry(mut self, purpose: Purpose, prompt_contains: impl Into<String>, response: impl Into<String>) -> Self {
        self.entries.push(ScriptEntry {
            purpose,
            prompt_contains: prompt_contains.into(),
            response: response.into(),
        });
        self
    }

    pub fn with_default(mut self, purpose: Purpose, responder: Responder) -> Self {
        self.defaults.insert(purpose, responder);
        self
    }

    /// Fills in offline defaults for purposes without one: extractive answers
    /// and pass-through summaries.
    pub fn with_standard_defaults(mut self) -> Self {
        self.defaults
            .entry(Purpose::Answer)
            .or_insert_with(|| Arc::new(|r: &ModelRequest| extractive_answer(&r.prompt)));
        self.defaults.entry(Purpose::Summarize).or_insert_with(|| {
            Arc::new(|r: &ModelRequest| prompts::evidence_of(&r.prompt).unwrap_or_default().to_string())
        });
        self
    }

    pub fn standard() -> Self {
        Self::new().with_standard_defaults()
    }
}

impl ModelBackend for MockBackend {
    fn name(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let text = self
            .exact
            .get(&(request.purpose, prompt_hash(&request.prompt)))
            .cloned()
            .or_else(|| {
                self.entries
                    .iter()
                    .find(|e| e.purpose == request.purpose && request.prompt.contains(&e.prompt_contains))
                    .map(|e| e.response.clone())
            })
            .or_else(|| self.defaults.get(&request.purpose).map(|f| f(request)))
            .ok_or_else(|| LlmError::ScriptMiss {
                purpose: request.purpose,
                prompt_head: request.prompt.chars().take(60).collect(),
            })?;
        Ok(ModelResponse { token_count: estimate_tokens(&text), text, latency_ms: 0 })
    }
}
