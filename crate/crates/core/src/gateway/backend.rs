//! Chat-completion backends: wire-protocol HTTP client and scripted mock.

use super::{ChatRequest, Completion, FinishReason, GatewayError};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

/// A chat-completion provider.
///
/// Backends that support server-side multi-sampling ("n") implement
/// [`Backend::complete_batch`]; the gateway expands the rest client-side via
/// [`Backend::complete_one`]. The two strategies are observationally
/// identical under caching.
pub trait Backend: Send + Sync {
    fn supports_multi_sample(&self) -> bool;

    /// One call returning all `n_samples` completions.
    fn complete_batch(&self, request: &ChatRequest) -> Result<Vec<Completion>, GatewayError>;

    /// One call returning the completion for a single sample index.
    fn complete_one(
        &self,
        request: &ChatRequest,
        sample_index: u32,
    ) -> Result<Completion, GatewayError>;
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

/// Env var read for the bearer token unless the config overrides it.
pub const DEFAULT_API_KEY_ENV: &str = "FACTALIGN_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Server base URL; `/v1/chat/completions` is appended unless the URL
    /// already ends in `completions`.
    pub base_url: String,
    pub timeout_ms: u64,
    /// Name of the env var holding the API key.
    pub api_key_env: String,
    /// Whether the server honors the `n` request field.
    pub supports_n: bool,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://127.0.0.1:8000".into(),
            timeout_ms: 30_000,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            supports_n: true,
        }
    }
}

/// HTTP POST of `{model, messages, temperature, top_p, n, max_tokens, seed?}`
/// returning `{choices:[{message:{content}, finish_reason}]}`.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    supports_n: bool,
    backend_label: String,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    n: u32,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

impl HttpBackend {
    pub fn new(label: impl Into<String>, config: &HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let endpoint = if config.base_url.ends_with("completions") {
            config.base_url.clone()
        } else {
            format!("{}/v1/chat/completions", config.base_url.trim_end_matches('/'))
        };
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        HttpBackend {
            agent,
            endpoint,
            api_key,
            supports_n: config.supports_n,
            backend_label: label.into(),
        }
    }

    fn post(&self, request: &ChatRequest, n: u32) -> Result<Vec<Completion>, GatewayError> {
        let body = WireRequest {
            model: &request.model,
            messages: request
                .messages
                .iter()
                .map(|m| WireMessage { role: m.role.as_str(), content: &m.content })
                .collect(),
            temperature: request.sampling.temperature,
            top_p: request.sampling.top_p,
            n,
            max_tokens: request.sampling.max_tokens,
            seed: request.sampling.seed,
        };
        let transport = |message: String| GatewayError::Transport {
            backend: self.backend_label.clone(),
            message,
        };
        let protocol = |message: String| GatewayError::Protocol {
            backend: self.backend_label.clone(),
            message,
        };

        let mut builder = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder.send_json(&body).map_err(|e| transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 500 {
            return Err(transport(format!("server returned status {status}")));
        }
        if status >= 400 {
            return Err(protocol(format!("server returned status {status}")));
        }
        let wire: WireResponse =
            response.body_mut().read_json().map_err(|e| protocol(e.to_string()))?;
        Ok(wire
            .choices
            .into_iter()
            .enumerate()
            .map(|(i, choice)| Completion {
                text: choice.message.content,
                sample_index: i as u32,
                finish_reason: match choice.finish_reason.as_deref() {
                    Some("stop") | None => FinishReason::Stop,
                    Some("length") => FinishReason::Length,
                    Some(_) => FinishReason::Error,
                },
            })
            .collect())
    }
}

impl Backend for HttpBackend {
    fn supports_multi_sample(&self) -> bool {
        self.supports_n
    }

    fn complete_batch(&self, request: &ChatRequest) -> Result<Vec<Completion>, GatewayError> {
        self.post(request, request.sampling.n_samples)
    }

    fn complete_one(
        &self,
        request: &ChatRequest,
        sample_index: u32,
    ) -> Result<Completion, GatewayError> {
        let mut completions = self.post(request, 1)?;
        if completions.is_empty() {
            return Err(GatewayError::Protocol {
                backend: self.backend_label.clone(),
                message: "reply contained no choices".into(),
            });
        }
        let mut completion = completions.remove(0);
        completion.sample_index = sample_index;
        Ok(completion)
    }
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// What a mock returns when no entry matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockFallback {
    /// Missing entries are errors (the default; surfaces unscripted prompts).
    Error,
    /// Echo the last user message.
    Echo,
    /// A fixed canned reply.
    Fixed(String),
}

/// One line of a mock script file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockEntry {
    pub prompt_digest: String,
    pub sample_index: u32,
    pub text: String,
}

/// Table from (prompt digest, sample index) to response text.
#[derive(Debug, Clone)]
pub struct MockScript {
    entries: HashMap<(String, u32), String>,
    fallback: MockFallback,
}

impl MockScript {
    pub fn new(fallback: MockFallback) -> Self {
        MockScript { entries: HashMap::new(), fallback }
    }

    pub fn insert(&mut self, prompt_digest: impl Into<String>, sample_index: u32, text: impl Into<String>) {
        self.entries.insert((prompt_digest.into(), sample_index), text.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, u32), &String)> {
        self.entries.iter()
    }

    /// Load a JSONL script of `{prompt_digest, sample_index, text}` lines.
    /// Conflicting duplicates are an error; identical duplicates collapse.
    pub fn load(path: &Path, fallback: MockFallback) -> Result<Self, GatewayError> {
        let data = std::fs::read_to_string(path).map_err(|e| GatewayError::Transport {
            backend: "mock".into(),
            message: format!("cannot read script {}: {e}", path.display()),
        })?;
        let mut script = MockScript::new(fallback);
        for (idx, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockEntry =
                serde_json::from_str(line).map_err(|e| GatewayError::Protocol {
                    backend: "mock".into(),
                    message: format!("{}:{}: bad script line: {e}", path.display(), idx + 1),
                })?;
            let key = (entry.prompt_digest.clone(), entry.sample_index);
            if let Some(existing) = script.entries.get(&key) {
                if existing != &entry.text {
                    return Err(GatewayError::Protocol {
                        backend: "mock".into(),
                        message: format!(
                            "{}:{}: conflicting duplicate for ({}, {})",
                            path.display(),
                            idx + 1,
                            entry.prompt_digest,
                            entry.sample_index
                        ),
                    });
                }
            }
            script.entries.insert(key, entry.text);
        }
        Ok(script)
    }

    /// Write the script as JSONL, sorted by (digest, index) for stable diffs.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut rows: Vec<MockEntry> = self
            .entries
            .iter()
            .map(|((digest, index), text)| MockEntry {
                prompt_digest: digest.clone(),
                sample_index: *index,
                text: text.clone(),
            })
            .collect();
        rows.sort_by(|a, b| {
            (&a.prompt_digest, a.sample_index).cmp(&(&b.prompt_digest, b.sample_index))
        });
        let mut out = Vec::new();
        for row in rows {
            out.extend_from_slice(serde_json::to_string(&row).expect("script entry").as_bytes());
            out.push(b'\n');
        }
        std::fs::write(path, out)
    }
}

/// Deterministic table-driven backend; identical request and script give a
/// bit-reproducible reply.
pub struct MockBackend {
    script: MockScript,
    supports_n: bool,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script, supports_n: true }
    }

    /// Disable server-side multi-sampling to exercise client-side expansion.
    pub fn without_multi_sample(mut self) -> Self {
        self.supports_n = false;
        self
    }

    fn lookup(&self, request: &ChatRequest, sample_index: u32) -> Result<Completion, GatewayError> {
        let digest = super::prompt_digest(&request.messages);
        match self.script.entries.get(&(digest.clone(), sample_index)) {
            Some(text) => Ok(Completion {
                text: text.clone(),
                sample_index,
                finish_reason: FinishReason::Stop,
            }),
            None => match &self.script.fallback {
                MockFallback::Error => Err(GatewayError::MockMiss { digest, sample_index }),
                MockFallback::Echo => Ok(Completion {
                    text: request.messages.last().map(|m| m.content.clone()).unwrap_or_default(),
                    sample_index,
                    finish_reason: FinishReason::Stop,
                }),
                MockFallback::Fixed(text) => Ok(Completion {
                    text: text.clone(),
                    sample_index,
                    finish_reason: FinishReason::Stop,
                }),
            },
        }
    }
}

impl Backend for MockBackend {
    fn supports_multi_sample(&self) -> bool {
        self.supports_n
    }

    fn complete_batch(&self, request: &ChatRequest) -> Result<Vec<Completion>, GatewayError> {
        (0..request.sampling.n_samples).map(|i| self.lookup(request, i)).collect()
    }

    fn complete_one(
        &self,
        request: &ChatRequest,
        sample_index: u32,
    ) -> Result<Completion, GatewayError> {
        self.lookup(request, sample_index)
    }
}
