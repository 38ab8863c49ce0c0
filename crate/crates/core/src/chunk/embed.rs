use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::text::{is_stopword, stem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound(deserialize = "F: Scalar"))]
pub struct EmbeddingVector<F> {
    values: Vec<F>,
}

impl<F: Scalar> EmbeddingVector<F> {
    pub fn new(values: Vec<F>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn norm(&self) -> F {
        self.values.iter().fold(F::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > F::zero() {
            for v in &mut self.values {
                *v = *v / n;
            }
        }
        self
    }
}

/// Cosine similarity; zero when either side has zero norm.
pub fn cosine<F: Scalar>(a: &EmbeddingVector<F>, b: &EmbeddingVector<F>) -> F {
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y);
    let denom = a.norm() * b.norm();
    if denom > F::zero() {
        dot / denom
    } else {
        F::zero()
    }
}

/// Text embedding backend. Vectors are only comparable within one `id()`.
pub trait Embedder<F: Scalar>: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Result<EmbeddingVector<F>, EmbedError>;
}

/// Seeded feature-hashing embedder over stemmed non-stopword tokens and their
/// character trigrams. Deterministic and offline; token overlap drives similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: 512, seed: 0x5eed }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim, seed }
    }

    fn bucket(&self, kind: u8, feature: &str) -> (usize, bool) {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write_u8(kind);
        h.write(feature.as_bytes());
        let v = h.finish();
        ((v % self.dim as u64) as usize, v >> 63 == 1)
    }

    /// Letters and digits form separate tokens, so "FY2022" yields "fy" and "2022".
    fn tokens(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        let mut cur_digit = false;
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                let d = ch.is_ascii_digit();
                if !cur.is_empty() && d != cur_digit {
                    out.push(std::mem::take(&mut cur));
                }
                cur_digit = d;
                cur.extend(ch.to_lowercase());
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }
}

impl<F: Scalar> Embedder<F> for HashingEmbedder {
    fn id(&self) -> String {
        format!("hashing-v2/dim={}/seed={}", self.dim, self.seed)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<F>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut acc = vec![0.0f64; self.dim];
        let mut add = |(i, neg): (usize, bool), w: f64| acc[i] += if neg { -w } else { w };
        let all = Self::tokens(text);
        let content: Vec<&String> = all.iter().filter(|t| !is_stopword(t)).collect();
        // A text made only of stopwords keeps them rather than embedding to zero.
        let kept = if content.is_empty() { all.iter().collect() } else { content };
        for tok in kept {
            let word = stem(tok);
            add(self.bucket(0, &word), 1.0);
            let padded: Vec<char> = format!("<{word}>").chars().collect();
            if padded.len() > 4 {
                for g in padded.windows(3) {
                    add(self.bucket(1, &g.iter().collect::<String>()), 0.25);
                }
            }
        }
        let v = EmbeddingVector::new(acc.into_iter().map(F::lit).collect());
        if v.norm() == F::zero() {
            // only possible when every feature cancelled out
            return Err(EmbedError::EmptyText);
        }
        Ok(v.normalized())
    }
}

/// Remote embedder for an OpenAI-style `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub endpoint: String,
    pub model: String,
    pub auth_token: Option<String>,
    pub timeout: Duration,
}

impl<F: Scalar> Embedder<F> for HttpEmbedder {
    fn id(&self) -> String {
        format!("http/{}/{}", self.endpoint, self.model)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<F>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::json!({ "model": self.model, "input": text }).to_string();
        let mut req = agent.post(&self.endpoint).header("content-type", "application/json");
        if let Some(tok) = &self.auth_token {
            req = req.header("authorization", &format!("Bearer {tok}"));
        }
        let unavailable = |m: String| EmbedError::EmbedderUnavailable(m);
        let mut resp = req.send(body.as_bytes()).map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("HTTP {}", resp.status())));
        }
        let raw = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| unavailable(e.to_string()))?;
        let json: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| unavailable(e.to_string()))?;
        let values = json["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| unavailable("response has no data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().map(F::lit))
            .collect::<Option<Vec<F>>>()
            .ok_or_else(|| unavailable("non-numeric embedding value".into()))?;
        Ok(EmbeddingVector::new(values))
    }
}
