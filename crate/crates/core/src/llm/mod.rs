//! Language-model access: request types, a retrying client with a
//! concurrency cap, a deterministic mock, an HTTP chat-completion backend and
//! the prompt template library.

mod http;
mod mock;
mod prompts;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use mock::{MockBackend, Responder, ScriptedBackend};
pub use prompts::{placeholders, render_template, PromptLibrary, TEMPLATE_IDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    VisionChat,
    TextChat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 1024,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub media_type: String,
    pub data: Vec<u8>,
}

impl EncodedImage {
    pub fn png(data: Vec<u8>) -> Self {
        Self {
            media_type: "image/png".into(),
            data,
        }
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.data))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub kind: RequestKind,
    pub system_prompt: String,
    pub user_prompt: String,
    pub images: Vec<EncodedImage>,
    pub params: DecodeParams,
    /// Short tag naming the call site, used in logs and audit file names.
    pub task: String,
    /// Side information for test backends. Never sent to a model and not
    /// part of the request key.
    pub metadata: BTreeMap<String, String>,
}

impl LlmRequest {
    pub fn text(task: &str, system: &str, user: &str) -> Self {
        Self {
            kind: RequestKind::TextChat,
            system_prompt: system.into(),
            user_prompt: user.into(),
            images: Vec::new(),
            params: DecodeParams::default(),
            task: task.into(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn vision(task: &str, system: &str, user: &str, images: Vec<EncodedImage>) -> Self {
        Self {
            kind: RequestKind::VisionChat,
            images,
            ..Self::text(task, system, user)
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            RequestKind::VisionChat if self.images.is_empty() => {
                Err(LlmError::InvalidRequest("vision request without images".into()))
            }
            RequestKind::TextChat if !self.images.is_empty() => {
                Err(LlmError::InvalidRequest("text request with images".into()))
            }
            _ => Ok(()),
        }
    }

    /// Hex sha256 over system prompt, user prompt and image digests.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system_prompt.as_bytes());
        h.update([0]);
        h.update(self.user_prompt.as_bytes());
        for img in &self.images {
            h.update([0]);
            h.update(img.digest().as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendReply {
    pub text: String,
    pub usage: Usage,
}

impl BackendReply {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub backend_id: String,
    pub attempts: u32,
}

/// Failure of a single backend call.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend {backend} does not support {kind:?} requests")]
    UnsupportedKind { backend: String, kind: RequestKind },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempts: {message}")]
    RateLimited { attempts: u32, message: String },
    #[error("backend error: {0}")]
    Fatal(String),
    #[error("cancelled")]
    Cancelled,
    #[error("unresolved placeholder {{{{{0}}}}}")]
    MissingBinding(String),
    #[error("unknown prompt template {0}")]
    UnknownTemplate(String),
    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
}

/// A language model endpoint. Implementations must be safe to call from many
/// threads at once.
pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;

    fn supports(&self, kind: RequestKind) -> bool;

    fn call(&self, request: &LlmRequest) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Each delay is scaled by a uniform factor in `[1 - jitter, 1]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
            jitter: 0.5,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: 0.0,
        }
    }

    /// Delay after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32 << attempt.saturating_sub(1).min(16))
            .min(self.max_delay);
        let jitter = self.jitter.clamp(0.0, 1.0);
        let factor = if jitter > 0.0 {
            1.0 - rng.gen_range(0.0..=jitter)
        } else {
            1.0
        };
        exp.mul_f64(factor)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub requests: u64,
    pub attempts: u64,
    pub retries: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub max_in_flight: u64,
}

#[derive(Debug, Default)]
struct Telemetry {
    requests: AtomicU64,
    attempts: AtomicU64,
    retries: AtomicU64,
    failures: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
    max_in_flight: AtomicU64,
}

struct Semaphore {
    in_flight: Mutex<usize>,
    cv: Condvar,
    cap: usize,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(cap: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            cv: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> (Permit<'_>, usize) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        (Permit(self), *n)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    task: &'a str,
    key: &'a str,
    kind: RequestKind,
    system_prompt: &'a str,
    user_prompt: &'a str,
    image_digests: Vec<String>,
    params: &'a DecodeParams,
    response: Option<&'a LlmResponse>,
    error: Option<String>,
}

/// Shared handle that applies retries, the concurrency cap, telemetry and
/// audit logging on top of a backend.
pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    policy: RetryPolicy,
    limiter: Semaphore,
    telemetry: Telemetry,
    audit_dir: Option<PathBuf>,
    rng: Mutex<ChaCha8Rng>,
    cancel: Arc<AtomicBool>,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn LlmBackend>, policy: RetryPolicy, max_in_flight: usize) -> Self {
        Self {
            backend,
            policy,
            limiter: Semaphore::new(max_in_flight),
            telemetry: Telemetry::default(),
            audit_dir: None,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
            cancel: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn with_audit_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.audit_dir = Some(dir.into());
        self
    }

    /// Seeds the backoff jitter.
    pub fn with_seed(self, seed: u64) -> Self {
        *self.rng.lock().unwrap_or_else(|e| e.into_inner()) = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn with_cancel_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = flag;
        self
    }

    pub fn cancel_flag(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn supports(&self, kind: RequestKind) -> bool {
        self.backend.supports(kind)
    }

    pub fn telemetry(&self) -> TelemetrySnapshot {
        let t = &self.telemetry;
        TelemetrySnapshot {
            requests: t.requests.load(Ordering::SeqCst),
            attempts: t.attempts.load(Ordering::SeqCst),
            retries: t.retries.load(Ordering::SeqCst),
            failures: t.failures.load(Ordering::SeqCst),
            prompt_tokens: t.prompt_tokens.load(Ordering::SeqCst),
            completion_tokens: t.completion_tokens.load(Ordering::SeqCst),
            max_in_flight: t.max_in_flight.load(Ordering::SeqCst),
        }
    }

    /// One completion, retried on transient and rate-limit failures.
    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        if !self.backend.supports(request.kind) {
            return Err(LlmError::UnsupportedKind {
                backend: self.backend.id().to_string(),
                kind: request.kind,
            });
        }
        self.telemetry.requests.fetch_add(1, Ordering::SeqCst);
        let result = self.attempt_loop(request);
        if result.is_err() {
            self.telemetry.failures.fetch_add(1, Ordering::SeqCst);
        }
        self.audit(request, &result)?;
        result
    }

    fn attempt_loop(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let max = self.policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            if self.is_cancelled() {
                return Err(LlmError::Cancelled);
            }
            attempt += 1;
            self.telemetry.attempts.fetch_add(1, Ordering::SeqCst);
            let outcome = {
                let (_permit, in_flight) = self.limiter.acquire();
                self.telemetry
                    .max_in_flight
                    .fetch_max(in_flight as u64, Ordering::SeqCst);
                self.backend.call(request)
            };
            let err = match outcome {
                Ok(reply) => {
                    self.telemetry
                        .prompt_tokens
                        .fetch_add(reply.usage.prompt_tokens, Ordering::SeqCst);
                    self.telemetry
                        .completion_tokens
                        .fetch_add(reply.usage.completion_tokens, Ordering::SeqCst);
                    return Ok(LlmResponse {
                        text: reply.text,
                        usage: reply.usage,
                        backend_id: self.backend.id().to_string(),
                        attempts: attempt,
                    });
                }
                Err(BackendError::Fatal(m)) => return Err(LlmError::Fatal(m)),
                Err(e) => e,
            };
            tracing::debug!(task = %request.task, attempt, error = %err, "backend call failed");
            if attempt >= max {
                return Err(match err {
                    BackendError::RateLimited(message) => LlmError::RateLimited {
                        attempts: attempt,
                        message,
                    },
                    BackendError::Transient(message) | BackendError::Fatal(message) => LlmError::Transport {
                        attempts: attempt,
                        message,
                    },
                });
            }
            self.telemetry.retries.fetch_add(1, Ordering::SeqCst);
            let delay = {
                let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
                self.policy.delay(attempt, &mut *rng)
            };
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
        }
    }

    fn audit(&self, request: &LlmRequest, result: &Result<LlmResponse, LlmError>) -> Result<(), LlmError> {
        let Some(dir) = &self.audit_dir else {
            return Ok(());
        };
        let key = request.key();
        let record = AuditRecord {
            task: &request.task,
            key: &key,
            kind: request.kind,
            system_prompt: &request.system_prompt,
            user_prompt: &request.user_prompt,
            image_digests: request.images.iter().map(EncodedImage::digest).collect(),
            params: &request.params,
            response: result.as_ref().ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let task: String = request
            .task
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{task}-{}.json", &key[..16]));
        let text = crate::dataset::canonical_string(&record);
        crate::io::write_atomic(&path, text.as_bytes())?;
        Ok(())
    }
}
