use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{CompletionBackend, CompletionRequest, CompletionResponse, FinishReason, LlmError, LlmSettings, Usage};

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Spaces request starts evenly to honour a requests-per-minute limit.
struct Throttle {
    interval: Duration,
    next: Mutex<Instant>,
}

impl Throttle {
    fn new(rpm: u32) -> Self {
        let interval = if rpm == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / rpm as f64)
        };
        Throttle {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: usize,
    #[serde(default)]
    completion_tokens: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

/// Client for OpenAI-compatible `/v1/completions` endpoints.
pub struct HttpBackend {
    settings: LlmSettings,
    api_key: Option<String>,
    agent: ureq::Agent,
    calls: AtomicUsize,
    slots: Slots,
    throttle: Throttle,
}

impl HttpBackend {
    /// Reads the API key from `settings.api_key_env` if set.
    pub fn new(settings: LlmSettings) -> Self {
        let api_key = std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(settings, api_key)
    }

    pub fn with_api_key(settings: LlmSettings, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs.max(1))))
            .build()
            .into();
        HttpBackend {
            slots: Slots::new(settings.max_in_flight),
            throttle: Throttle::new(settings.requests_per_minute),
            settings,
            api_key,
            agent,
            calls: AtomicUsize::new(0),
        }
    }

    /// Network requests attempted so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn endpoint(&self) -> String {
        let base = self.settings.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/completions")
        } else {
            format!("{base}/v1/completions")
        }
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let mut body = json!({
            "model": request.model_name,
            "prompt": request.prompt,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        let _slot = self.slots.acquire();
        self.throttle.wait();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(self.endpoint()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| LlmError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Http { status, body: text });
        }
        let wire: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Decode(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::Decode("response has no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        let usage = wire.usage.map_or_else(Usage::default, |u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok(CompletionResponse {
            text: choice.text,
            finish_reason,
            usage,
            backend_id: self.id(),
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .settings
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.settings.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.settings.model)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let max_attempts = self.settings.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retriable() && attempt + 1 < max_attempts => {
                    log::warn!("completion attempt {} failed: {e}; retrying", attempt + 1);
                    thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(LlmError::Transport { message, .. }) => {
                    return Err(LlmError::Transport {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Err(LlmError::Http { status, body }) if status == 429 || status >= 500 => {
                    return Err(LlmError::Transport {
                        attempts: attempt + 1,
                        message: format!("HTTP {status}: {body}"),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Serves the given (status, body) replies in order, one per connection,
    /// and records each request body.
    fn mock_server(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), seen)
    }

    fn settings(base_url: String) -> LlmSettings {
        LlmSettings {
            base_url,
            max_attempts: 3,
            initial_backoff_ms: 1,
            max_backoff_ms: 5,
            requests_per_minute: 0,
            timeout_secs: 5,
            ..LlmSettings::default()
        }
    }

    const OK: &str = r#"{"choices":[{"text":" done","finish_reason":"stop"}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#;

    #[test]
    fn sends_wire_fields_and_parses_reply() {
        let (url, seen) = mock_server(vec![(200, OK.into())]);
        let backend = HttpBackend::with_api_key(settings(url), Some("k".into()));
        let mut req = CompletionRequest::new("Say done", "m1", 7);
        req.stop_sequences = vec!["\n".into()];
        let resp = backend.complete(&req).unwrap();
        assert_eq!(resp.text, " done");
        assert_eq!(resp.finish_reason, FinishReason::Stop);
        assert_eq!(resp.usage.prompt_tokens, 3);
        let sent: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["model"], "m1");
        assert_eq!(sent["max_tokens"], 7);
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["stop"][0], "\n");
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, _) = mock_server(vec![(503, "{}".into()), (429, "{}".into()), (200, OK.into())]);
        let backend = HttpBackend::with_api_key(settings(url), None);
        assert!(backend.complete(&CompletionRequest::new("p", "m", 1)).is_ok());
        assert_eq!(backend.calls(), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, _) = mock_server(vec![(401, r#"{"error":"bad key"}"#.into())]);
        let backend = HttpBackend::with_api_key(settings(url), None);
        let err = backend.complete(&CompletionRequest::new("p", "m", 1)).unwrap_err();
        assert!(matches!(err, LlmError::Http { status: 401, .. }));
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let (url, _) = mock_server(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
        let backend = HttpBackend::with_api_key(settings(url), None);
        let err = backend.complete(&CompletionRequest::new("p", "m", 1)).unwrap_err();
        assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn truncation_sets_length() {
        let body = r#"{"choices":[{"text":"abc","finish_reason":"length"}]}"#;
        let (url, _) = mock_server(vec![(200, body.into())]);
        let backend = HttpBackend::with_api_key(settings(url), None);
        let resp = backend.complete(&CompletionRequest::new("p", "m", 1)).unwrap();
        assert!(resp.truncated());
    }

    #[test]
    fn unreachable_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let backend = HttpBackend::with_api_key(settings(url), None);
        let err = backend.complete(&CompletionRequest::new("p", "m", 1)).unwrap_err();
        assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn throttle_spaces_requests() {
        let t = Throttle::new(1200);
        let start = Instant::now();
        for _ in 0..3 {
            t.wait();
        }
        assert!(start.elapsed() >= Duration::from_millis(100));
    }
}
