use std::time::{Duration, Instant};

use super::{estimate_tokens, LlmError, ModelBackend, ModelRequest, ModelResponse};

/// Chat-completion client for OpenAI-compatible endpoints.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub endpoint: String,
    pub model: String,
    pub auth_token: Option<String>,
    pub timeout: Duration,
}

impl ModelBackend for HttpBackend {
    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.temperature(),
            "max_tokens": request.max_tokens,
        })
        .to_string();
        let mut req = agent.post(&self.endpoint).header("content-type", "application/json");
        if let Some(tok) = &self.auth_token {
            req = req.header("authorization", &format!("Bearer {tok}"));
        }
        let started = Instant::now();
        let unavailable = |m: String| LlmError::BackendUnavailable(m);
        let mut resp = req.send(body.as_bytes()).map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(unavailable(format!("{} returned HTTP {}", self.endpoint, status.as_u16())));
        }
        let raw = resp.body_mut().read_to_string().map_err(|e| unavailable(e.to_string()))?;
        let json: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| unavailable(format!("malformed response: {e}")))?;
        let choice = &json["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .or_else(|| choice["text"].as_str())
            .ok_or_else(|| unavailable("response has no completion text".into()))?
            .to_string();
        let token_count = json["usage"]["completion_tokens"]
            .as_u64()
            .map(|n| n as usize)
            .unwrap_or_else(|| estimate_tokens(&text));
        Ok(ModelResponse {
            text,
            token_count,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
