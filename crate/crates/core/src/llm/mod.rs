//! Completion backends behind one contract.
//!
//! [`HttpBackend`] talks to an OpenAI-compatible `/v1/completions` endpoint,
//! [`ReplayBackend`] serves recorded completions keyed by prompt digest, and
//! [`EchoGoldBackend`] answers from gold annotations for end-to-end tests.
//! [`CachedBackend`] wraps any backend with a persistent JSONL cache.

mod cache;
mod echo;
mod http;
mod replay;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompting::{PromptKind, RenderedPrompt};

pub use cache::{CacheRecord, CachedBackend, ResponseCache};
pub use echo::EchoGoldBackend;
pub use http::HttpBackend;
pub use replay::{FixtureRecord, ReplayBackend};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Decode(String),
    #[error("prompt needs ~{needed} tokens (prompt + output), budget is {budget}")]
    Budget { needed: usize, budget: usize },
    #[error("no replay fixture for prompt digest {0}")]
    MissingFixture(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("cache {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    /// Whether a later attempt might succeed.
    pub fn is_retriable(&self) -> bool {
        match self {
            LlmError::Transport { .. } => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_output_tokens: usize,
    pub temperature: f64,
    pub model_name: String,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    /// Greedy request (temperature 0) with no stop sequences.
    pub fn new(prompt: impl Into<String>, model_name: impl Into<String>, max_output_tokens: usize) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            max_output_tokens,
            temperature: 0.0,
            model_name: model_name.into(),
            stop_sequences: Vec::new(),
        }
    }

    pub fn cache_key(&self) -> CacheKey {
        CacheKey::for_request(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Usage,
    pub backend_id: String,
}

impl CompletionResponse {
    pub fn truncated(&self) -> bool {
        self.finish_reason == FinishReason::Length
    }
}

/// SHA-256 over model, prompt bytes, output limit and stop sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(pub String);

impl CacheKey {
    pub fn for_request(request: &CompletionRequest) -> Self {
        let mut h = Sha256::new();
        // Length prefixes keep field boundaries unambiguous.
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(request.model_name.as_bytes());
        field(request.prompt.as_bytes());
        field(&(request.max_output_tokens as u64).to_le_bytes());
        field(&(request.stop_sequences.len() as u64).to_le_bytes());
        for s in &request.stop_sequences {
            field(s.as_bytes());
        }
        CacheKey(hex::encode(h.finalize()))
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hex SHA-256 of the prompt bytes; the replay fixture key.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Rough subword count: a quarter token per character, at least one per word.
///
/// Only used for budget checks and output limits.
pub fn estimate_tokens(text: &str) -> usize {
    text.split_whitespace().map(|w| w.chars().count().div_ceil(4).max(1)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub model: String,
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    /// Upper bound on estimated prompt plus output tokens.
    pub token_budget: Option<usize>,
    /// Overrides the per-kind default output limit.
    pub max_output_tokens: Option<usize>,
    pub stop_sequences: Vec<String>,
    /// Output limit for QA answers, which are a short phrase.
    pub qa_max_output_tokens: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            model: "text-davinci-003".into(),
            base_url: "https://api.openai.com".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_attempts: 5,
            initial_backoff_ms: 1000,
            max_backoff_ms: 30_000,
            requests_per_minute: 60,
            max_in_flight: 4,
            timeout_secs: 120,
            token_budget: Some(8000),
            max_output_tokens: None,
            stop_sequences: Vec::new(),
            qa_max_output_tokens: 64,
        }
    }
}

impl LlmSettings {
    /// Output limit for a prompt: 1.5× the estimated body for document and
    /// mention-detection prompts, a fixed small limit for QA.
    pub fn output_limit(&self, prompt: &RenderedPrompt) -> usize {
        if let Some(n) = self.max_output_tokens {
            return n;
        }
        match prompt.kind {
            PromptKind::Qa => self.qa_max_output_tokens,
            _ => (estimate_tokens(&prompt.body) * 3).div_ceil(2).max(1),
        }
    }

    /// Builds the request for a rendered prompt, rejecting it when the
    /// estimated prompt plus output exceeds the token budget.
    pub fn request_for(&self, prompt: &RenderedPrompt) -> Result<CompletionRequest, LlmError> {
        let max_out = self.output_limit(prompt);
        if let Some(budget) = self.token_budget {
            let needed = estimate_tokens(&prompt.text) + max_out;
            if needed > budget {
                return Err(LlmError::Budget { needed, budget });
            }
        }
        let mut req = CompletionRequest::new(prompt.text.clone(), self.model.clone(), max_out);
        req.stop_sequences = self.stop_sequences.clone();
        if prompt.kind == PromptKind::Qa && req.stop_sequences.is_empty() {
            req.stop_sequences.push("\n".into());
        }
        Ok(req)
    }
}
