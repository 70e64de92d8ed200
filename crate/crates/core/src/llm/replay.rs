use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason, LlmError, Usage};

/// One recorded completion. `prompt` may be given instead of the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub completion: String,
}

/// Serves completions recorded as JSON lines, keyed by prompt digest.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    source: String,
    fixtures: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(source: impl Into<String>) -> Self {
        ReplayBackend {
            source: source.into(),
            fixtures: HashMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let cache_err = |source| LlmError::Cache {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(cache_err)?;
        let mut backend = ReplayBackend::new(path.display().to_string());
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(cache_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
            backend.insert_record(record).map_err(|e| LlmError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(backend)
    }

    fn insert_record(&mut self, record: FixtureRecord) -> Result<(), String> {
        let digest = match (record.prompt_digest, record.prompt) {
            (Some(d), _) => d.to_ascii_lowercase(),
            (None, Some(p)) => prompt_digest(&p),
            (None, None) => return Err("fixture needs `prompt_digest` or `prompt`".into()),
        };
        self.fixtures.insert(digest, record.completion);
        Ok(())
    }

    pub fn insert(&mut self, prompt: &str, completion: impl Into<String>) {
        self.fixtures.insert(prompt_digest(prompt), completion.into());
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    /// Writes the fixtures as JSON lines, sorted by digest.
    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut entries: Vec<_> = self.fixtures.iter().collect();
        entries.sort();
        let mut out = File::create(path)?;
        for (digest, completion) in entries {
            let record = FixtureRecord {
                prompt_digest: Some(digest.clone()),
                prompt: None,
                completion: completion.clone(),
            };
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
        Ok(())
    }
}

impl CompletionBackend for ReplayBackend {
    fn id(&self) -> String {
        format!("replay:{}", self.source)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let digest = prompt_digest(&request.prompt);
        let text = self.fixtures.get(&digest).ok_or(LlmError::MissingFixture(digest))?;
        Ok(CompletionResponse {
            text: text.clone(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            backend_id: self.id(),
        })
    }
}
