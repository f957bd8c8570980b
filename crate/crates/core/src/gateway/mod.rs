//! Uniform access to text-generation backends with retries, an optional
//! response cache, and per-phase cost accounting.

mod cache;
mod ledger;
mod live;
mod mock;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use crate::domain::PhaseId;
use crate::operators::OperatorKind;

pub use cache::{CacheKey, CacheRecord, ReplayBackend, ResponseCache};
pub use ledger::{CostLedger, LedgerEntry, Usage};
pub use live::{LiveBackend, API_KEY_ENV};
pub use mock::{MockBackend, Responder};

/// What a call is for; the ledger buckets on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Purpose {
    #[serde(rename = "evaluation")]
    Evaluation,
    #[serde(untagged)]
    Operator(OperatorKind),
}

impl Purpose {
    pub fn name(self) -> &'static str {
        match self {
            Purpose::Operator(op) => op.name(),
            Purpose::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<OperatorKind> for Purpose {
    fn from(op: OperatorKind) -> Self {
        Purpose::Operator(op)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt_text: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed_hint: Option<u64>,
    pub purpose: Purpose,
}

impl CompletionRequest {
    pub fn new(prompt_text: impl Into<String>, temperature: f64, purpose: Purpose) -> Self {
        CompletionRequest {
            prompt_text: prompt_text.into(),
            temperature,
            max_tokens: None,
            seed_hint: None,
            purpose,
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: Option<u32>) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_seed_hint(mut self, seed: u64) -> Self {
        self.seed_hint = Some(seed);
        self
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt_text.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt_text".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == Some(0) {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Errors a backend reports for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying (timeouts, 429, 5xx).
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
    #[error("no scripted response for {0}")]
    ScriptMiss(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("script miss: {0}")]
    ScriptMiss(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("missing credentials: set {0}")]
    MissingCredentials(&'static str),
}

pub trait Backend: Send + Sync {
    /// Stable name that becomes part of the cache key.
    fn identity(&self) -> String;

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; no wait before the first try
        if attempt <= 1 {
            return Duration::ZERO;
        }
        self.base_delay * 2u32.saturating_pow(attempt - 2)
    }
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock();
        while *n >= self.max {
            self.freed.wait(&mut n);
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock() -= 1;
        self.0.freed.notify_one();
    }
}

/// Front door for every model call. Shareable across threads.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    ledger: Mutex<CostLedger>,
    phase: Mutex<PhaseId>,
    retry: RetryPolicy,
    limiter: Option<Limiter>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            backend,
            cache: None,
            ledger: Mutex::new(CostLedger::default()),
            phase: Mutex::new(PhaseId::Init),
            retry: RetryPolicy::default(),
            limiter: None,
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Caps concurrent in-flight backend calls.
    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limiter = Some(Limiter {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            max: max.max(1),
        });
        self
    }

    pub fn backend_identity(&self) -> String {
        self.backend.identity()
    }

    /// Phase under which subsequent calls are booked.
    pub fn set_phase(&self, phase: PhaseId) {
        *self.phase.lock() = phase;
    }

    pub fn phase(&self) -> PhaseId {
        *self.phase.lock()
    }

    pub fn ledger_snapshot(&self) -> CostLedger {
        self.ledger.lock().clone()
    }

    /// Replaces the ledger, used when resuming from a checkpoint.
    pub fn restore_ledger(&self, ledger: CostLedger) {
        *self.ledger.lock() = ledger;
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        req.validate()?;
        let phase = self.phase();
        let key = self
            .cache
            .as_ref()
            .map(|_| CacheKey::new(&self.backend.identity(), req));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                self.ledger.lock().record_cache_hit();
                return Ok(hit);
            }
        }

        let _slot = self.limiter.as_ref().map(Limiter::acquire);
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            let delay = self.retry.delay_before(attempt);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
            match self.backend.complete(req) {
                Ok(resp) => {
                    self.ledger.lock().record(
                        phase,
                        req.purpose,
                        resp.prompt_tokens,
                        resp.completion_tokens,
                    );
                    if let (Some(cache), Some(key)) = (&self.cache, key) {
                        return cache.insert(key, resp).map_err(GatewayError::Cache);
                    }
                    return Ok(resp);
                }
                Err(BackendError::Transient(msg)) => {
                    log::warn!("attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                }
                Err(BackendError::Fatal(msg)) => return Err(GatewayError::Backend(msg)),
                Err(BackendError::ScriptMiss(msg)) => return Err(GatewayError::ScriptMiss(msg)),
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }
}
