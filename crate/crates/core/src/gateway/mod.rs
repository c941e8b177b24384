//! Uniform access to chat-completion backends.
//!
//! A [`Gateway`] routes [`ChatRequest`]s to registered backends — an HTTP
//! client speaking the common open inference-server protocol, or a
//! table-driven [`MockBackend`] for deterministic runs — optionally through a
//! persistent [`ResponseCache`]. With a warmed cache or a mock backend the
//! whole pipeline is a pure function of its inputs.

mod backend;
mod cache;
mod score;

pub use backend::{Backend, HttpBackend, HttpConfig, MockBackend, MockFallback, MockScript};
pub use cache::ResponseCache;
pub use score::{parse_scalar_score, ScorePatterns};

use crate::types::SamplingParams;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend {0} is not registered")]
    UnknownBackend(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend {backend}: transport failure: {message}")]
    Transport { backend: String, message: String },
    #[error("backend {backend}: malformed reply: {message}")]
    Protocol { backend: String, message: String },
    #[error("mock script has no entry for ({digest}, {sample_index})")]
    MockMiss { digest: String, sample_index: u32 },
}

impl GatewayError {
    fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport { .. })
    }

    fn clone_shallow(&self) -> GatewayError {
        match self {
            GatewayError::UnknownBackend(b) => GatewayError::UnknownBackend(b.clone()),
            GatewayError::InvalidRequest(m) => GatewayError::InvalidRequest(m.clone()),
            GatewayError::Transport { backend, message } => {
                GatewayError::Transport { backend: backend.clone(), message: message.clone() }
            }
            GatewayError::Protocol { backend, message } => {
                GatewayError::Protocol { backend: backend.clone(), message: message.clone() }
            }
            GatewayError::MockMiss { digest, sample_index } => {
                GatewayError::MockMiss { digest: digest.clone(), sample_index: *sample_index }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

impl MessageRole {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageRole::System => "system",
            MessageRole::User => "user",
            MessageRole::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: MessageRole,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: MessageRole::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: MessageRole::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: MessageRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub backend_id: String,
    pub model: String,
    pub messages: Vec<Message>,
    pub sampling: SamplingParams,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must be non-empty".into()));
        }
        if self.messages.last().map(|m| m.role) != Some(MessageRole::User) {
            return Err(GatewayError::InvalidRequest("last message must have role=user".into()));
        }
        self.sampling.validate().map_err(|e| GatewayError::InvalidRequest(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub sample_index: u32,
    pub finish_reason: FinishReason,
}

/// Digest of a chat transcript; the key mock scripts match on.
pub fn prompt_digest(messages: &[Message]) -> String {
    let pairs: Vec<(&str, &str)> =
        messages.iter().map(|m| (m.role.as_str(), m.content.as_str())).collect();
    crate::digest::transcript_digest("prompt.v1", &pairs)
}

/// Cache key for one sample of one request.
///
/// Perturbing any component (backend, model, transcript, temperature, top_p,
/// n_samples, seed, sample_index) changes the key.
pub fn cache_key(request: &ChatRequest, sample_index: u32) -> String {
    let transcript = prompt_digest(&request.messages);
    let seed = match request.sampling.seed {
        Some(s) => s.to_string(),
        None => "none".to_string(),
    };
    crate::digest::tagged_digest(
        "completion-cache.v1",
        &[
            &request.backend_id,
            &request.model,
            &transcript,
            &format!("{}", request.sampling.temperature),
            &format!("{}", request.sampling.top_p),
            &request.sampling.n_samples.to_string(),
            &seed,
            &sample_index.to_string(),
        ],
    )
}

/// Counting semaphore bounding in-flight requests per backend.
struct Limiter {
    permits: Mutex<u32>,
    cv: Condvar,
}

impl Limiter {
    fn new(max: u32) -> Self {
        Limiter { permits: Mutex::new(max.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.limiter.permits.lock().unwrap();
        *permits += 1;
        self.limiter.cv.notify_one();
    }
}

/// Transport and cache counters, shared across threads.
#[derive(Default)]
pub struct GatewayStats {
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub backend_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

struct RegisteredBackend {
    backend: Arc<dyn Backend>,
    model: String,
    limiter: Limiter,
}

/// Default bound on concurrent in-flight requests per backend.
pub const DEFAULT_MAX_IN_FLIGHT: u32 = 8;

const RETRY_ATTEMPTS: u32 = 3;
const RETRY_BASE_DELAY: Duration = Duration::from_millis(50);

pub struct Gateway {
    backends: HashMap<String, RegisteredBackend>,
    cache: Option<ResponseCache>,
    stats: Arc<GatewayStats>,
}

impl Gateway {
    pub fn new() -> Self {
        Gateway { backends: HashMap::new(), cache: None, stats: Arc::default() }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn register(
        &mut self,
        id: impl Into<String>,
        backend: Arc<dyn Backend>,
        model: impl Into<String>,
        max_in_flight: u32,
    ) {
        self.backends.insert(
            id.into(),
            RegisteredBackend { backend, model: model.into(), limiter: Limiter::new(max_in_flight) },
        );
    }

    /// Build a request against a registered backend, filling in its model.
    pub fn request(
        &self,
        backend_id: &str,
        messages: Vec<Message>,
        sampling: SamplingParams,
    ) -> Result<ChatRequest, GatewayError> {
        let reg = self
            .backends
            .get(backend_id)
            .ok_or_else(|| GatewayError::UnknownBackend(backend_id.to_string()))?;
        Ok(ChatRequest {
            backend_id: backend_id.to_string(),
            model: reg.model.clone(),
            messages,
            sampling,
        })
    }

    pub fn stats(&self) -> StatsSnapshot {
        StatsSnapshot {
            backend_calls: self.stats.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.stats.cache_hits.load(Ordering::SeqCst),
            cache_misses: self.stats.cache_misses.load(Ordering::SeqCst),
        }
    }

    fn lookup(&self, backend_id: &str) -> Result<&RegisteredBackend, GatewayError> {
        self.backends
            .get(backend_id)
            .ok_or_else(|| GatewayError::UnknownBackend(backend_id.to_string()))
    }

    fn with_retry<T>(
        &self,
        f: impl Fn() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut delay = RETRY_BASE_DELAY;
        let mut attempt = 0;
        loop {
            self.stats.backend_calls.fetch_add(1, Ordering::SeqCst);
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt + 1 < RETRY_ATTEMPTS => {
                    log::warn!("retrying after transport failure: {e}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// All-or-nothing completion: exactly `n_samples` completions ordered by
    /// sample index, or an error.
    pub fn complete(&self, request: &ChatRequest) -> Result<Vec<Completion>, GatewayError> {
        request.validate()?;
        let reg = self.lookup(&request.backend_id)?;
        let n = request.sampling.n_samples;
        if reg.backend.supports_multi_sample() {
            let _permit = reg.limiter.acquire();
            let mut completions = self.with_retry(|| reg.backend.complete_batch(request))?;
            if completions.len() != n as usize {
                return Err(GatewayError::Protocol {
                    backend: request.backend_id.clone(),
                    message: format!("expected {n} completions, got {}", completions.len()),
                });
            }
            completions.sort_by_key(|c| c.sample_index);
            Ok(completions)
        } else {
            let mut completions = Vec::with_capacity(n as usize);
            for index in 0..n {
                let _permit = reg.limiter.acquire();
                completions.push(self.with_retry(|| reg.backend.complete_one(request, index))?);
            }
            Ok(completions)
        }
    }

    /// Per-sample completion: one result per sample index. Callers that can
    /// tolerate partial failure (elicitation, judging) use this.
    pub fn complete_each(&self, request: &ChatRequest) -> Vec<Result<Completion, GatewayError>> {
        let n = request.sampling.n_samples.max(1);
        if let Err(e) = request.validate() {
            return (0..n).map(|_| Err(e.clone_shallow())).collect();
        }
        let reg = match self.lookup(&request.backend_id) {
            Ok(r) => r,
            Err(e) => {
                return (0..n).map(|_| Err(e.clone_shallow())).collect();
            }
        };
        if reg.backend.supports_multi_sample() {
            let _permit = reg.limiter.acquire();
            match self.with_retry(|| reg.backend.complete_batch(request)) {
                Ok(mut completions) => {
                    completions.sort_by_key(|c| c.sample_index);
                    if completions.len() != n as usize {
                        let e = GatewayError::Protocol {
                            backend: request.backend_id.clone(),
                            message: format!("expected {n} completions, got {}", completions.len()),
                        };
                        return (0..n).map(|_| Err(e.clone_shallow())).collect();
                    }
                    completions.into_iter().map(Ok).collect()
                }
                Err(e) => (0..n).map(|_| Err(e.clone_shallow())).collect(),
            }
        } else {
            (0..n)
                .map(|index| {
                    let _permit = reg.limiter.acquire();
                    self.with_retry(|| reg.backend.complete_one(request, index))
                })
                .collect()
        }
    }

    /// Cache-through variant of [`Gateway::complete`].
    pub fn cached_complete(&self, request: &ChatRequest) -> Result<Vec<Completion>, GatewayError> {
        let Some(cache) = &self.cache else {
            return self.complete(request);
        };
        request.validate()?;
        let n = request.sampling.n_samples;
        let keys: Vec<String> = (0..n).map(|i| cache_key(request, i)).collect();
        let cached: Vec<Option<Completion>> = keys.iter().map(|k| cache.get(k)).collect();
        if cached.iter().all(|c| c.is_some()) {
            self.stats.cache_hits.fetch_add(n as u64, Ordering::SeqCst);
            return Ok(cached.into_iter().map(|c| c.unwrap()).collect());
        }
        self.stats.cache_misses.fetch_add(1, Ordering::SeqCst);
        let completions = self.complete(request)?;
        for (key, completion) in keys.iter().zip(&completions) {
            cache.put(key, completion);
        }
        Ok(completions)
    }

    /// Cache-through variant of [`Gateway::complete_each`].
    pub fn cached_complete_each(
        &self,
        request: &ChatRequest,
    ) -> Vec<Result<Completion, GatewayError>> {
        let Some(cache) = &self.cache else {
            return self.complete_each(request);
        };
        let n = request.sampling.n_samples.max(1);
        if let Err(e) = request.validate() {
            return (0..n).map(|_| Err(e.clone_shallow())).collect();
        }
        let keys: Vec<String> = (0..n).map(|i| cache_key(request, i)).collect();
        let mut out: Vec<Option<Result<Completion, GatewayError>>> =
            keys.iter().map(|k| cache.get(k).map(Ok)).collect();
        let hits = out.iter().filter(|o| o.is_some()).count() as u64;
        self.stats.cache_hits.fetch_add(hits, Ordering::SeqCst);
        if out.iter().any(|o| o.is_none()) {
            self.stats.cache_misses.fetch_add(1, Ordering::SeqCst);
            let fresh = self.complete_each(request);
            for (i, result) in fresh.into_iter().enumerate() {
                if out[i].is_none() {
                    if let Ok(c) = &result {
                        cache.put(&keys[i], c);
                    }
                    out[i] = Some(result);
                }
            }
        }
        out.into_iter().map(|o| o.expect("every slot filled")).collect()
    }
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}
