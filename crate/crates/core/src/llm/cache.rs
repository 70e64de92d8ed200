use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{prompt_digest, CacheKey, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub model: String,
    pub prompt_digest: String,
    pub prompt_chars: usize,
    pub max_tokens: usize,
    #[serde(default)]
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub request: RequestSummary,
    pub response: CompletionResponse,
    pub timestamp: String,
}

/// Append-only JSONL response store.
///
/// Reads go through an in-memory map; appends are serialized and skip keys
/// already present, so retries never duplicate records.
#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<CacheKey, CompletionResponse>>,
    writer: Mutex<File>,
}

impl ResponseCache {
    /// Opens or creates the cache file. Unreadable lines are skipped with a warning.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| LlmError::Cache {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(io_err)?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) => {
                        entries.entry(r.key).or_insert(r.response);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable cache record: {e}", path.display(), n + 1),
                }
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        Ok(ResponseCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<CompletionResponse> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    /// Appends a record unless the key is already stored. Returns whether it wrote.
    pub fn put(&self, request: &CompletionRequest, response: &CompletionResponse) -> Result<bool, LlmError> {
        let key = request.cache_key();
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if self.get(&key).is_some() {
            return Ok(false);
        }
        let record = CacheRecord {
            key: key.clone(),
            request: RequestSummary {
                model: request.model_name.clone(),
                prompt_digest: prompt_digest(&request.prompt),
                prompt_chars: request.prompt.chars().count(),
                max_tokens: request.max_output_tokens,
                stop: request.stop_sequences.clone(),
            },
            response: response.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let line = serde_json::to_string(&record).map_err(|e| LlmError::Decode(e.to_string()))?;
        let io_err = |source| LlmError::Cache {
            path: self.path.display().to_string(),
            source,
        };
        writeln!(writer, "{line}").map_err(io_err)?;
        writer.flush().map_err(io_err)?;
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, response.clone());
        Ok(true)
    }
}

/// Consults the cache before the wrapped backend and stores its successes.
pub struct CachedBackend<B> {
    inner: B,
    cache: std::sync::Arc<ResponseCache>,
}

impl<B: CompletionBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: std::sync::Arc<ResponseCache>) -> Self {
        CachedBackend { inner, cache }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl<B: CompletionBackend> CompletionBackend for CachedBackend<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        if let Some(hit) = self.cache.get(&request.cache_key()) {
            return Ok(hit);
        }
        let response = self.inner.complete(request)?;
        if response.finish_reason != FinishReason::Error {
            self.cache.put(request, &response)?;
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ReplayBackend, Usage};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Counting(AtomicUsize);

    impl CompletionBackend for Counting {
        fn id(&self) -> String {
            "counting".into()
        }

        fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(CompletionResponse {
                text: format!("{}#{n}", request.prompt),
                finish_reason: FinishReason::Stop,
                usage: Usage::default(),
                backend_id: self.id(),
            })
        }
    }

    #[test]
    fn second_request_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let backend = CachedBackend::new(Counting(AtomicUsize::new(0)), Arc::clone(&cache));
        let req = CompletionRequest::new("p", "m", 3);
        let a = backend.complete(&req).unwrap();
        let b = backend.complete(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.inner().0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn survives_reopen_without_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("c.jsonl");
        let req = CompletionRequest::new("p", "m", 3);
        let mut replay = ReplayBackend::new("mem");
        replay.insert("p", "T");
        let resp = replay.complete(&req).unwrap();
        {
            let cache = ResponseCache::open(&path).unwrap();
            assert!(cache.put(&req, &resp).unwrap());
            assert!(!cache.put(&req, &resp).unwrap());
        }
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"not json\n")
            .unwrap();
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.get(&req.cache_key()), Some(resp));
        assert_eq!(cache.len(), 1);
        let lines = std::fs::read_to_string(&path).unwrap();
        assert_eq!(lines.lines().filter(|l| l.starts_with('{')).count(), 1);
    }

    #[test]
    fn concurrent_puts_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let req = CompletionRequest::new("p", "m", 3);
        let resp = CompletionResponse {
            text: "t".into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            backend_id: "x".into(),
        };
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (c, q, r) = (Arc::clone(&cache), req.clone(), resp.clone());
                std::thread::spawn(move || c.put(&q, &r).unwrap())
            })
            .collect();
        let wrote: usize = handles.into_iter().map(|h| usize::from(h.join().unwrap())).sum();
        assert_eq!(wrote, 1);
    }
}
