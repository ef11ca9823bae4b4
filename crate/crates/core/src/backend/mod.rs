//! Pluggable chat backends with session semantics, retries, rate
//! limiting, and content-addressed response caching.
//!
//! A [`Backend`] is shared across workers; each [`Session`] belongs to one
//! chain at a time. The cache key covers the full message history, not
//! just the last message, because chained responses depend on prior steps.

mod cache;
#[cfg(feature = "http")]
mod http;
mod replay;
mod scripted;

pub use cache::{CacheEntry, DiskCache};
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use replay::{RecordMessage, ReplayProvider, ReplayRecord};
pub use scripted::{
    scripted_rule_response, ScriptedProvider, FAKE_ANSWER, REAL_ANSWER, REFUSAL_TEXT,
    RUMOR_MARKER, UNKNOWN_MARKER,
};

use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Error from a single provider invocation.
#[derive(Debug, Error)]
pub enum ProviderError {
    /// Worth retrying: rate limits, transient server or network errors.
    #[error("retryable: {0}")]
    Retryable(String),
    /// Not worth retrying: bad request, missing replay fixture.
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend failure after {attempts} attempt(s): {last_error}")]
    Failure { attempts: u32, last_error: String },
    #[error("cache io error: {0}")]
    Cache(#[from] std::io::Error),
}

/// Something that can turn a message history into the next assistant
/// response.
pub trait Provider: Send + Sync {
    fn name(&self) -> &'static str;
    fn complete(&self, history: &[Message]) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base_ms: 200,
        }
    }
}

/// Token bucket shared across workers; quotas are account-wide.
struct TokenBucket {
    per_minute: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(per_minute: u32) -> Self {
        Self {
            per_minute: per_minute as f64,
            state: Mutex::new((per_minute as f64, Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(st.1).as_secs_f64();
                st.0 = (st.0 + elapsed * self.per_minute / 60.0).min(self.per_minute);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    None
                } else {
                    Some(Duration::from_secs_f64((1.0 - st.0) * 60.0 / self.per_minute))
                }
            };
            match wait {
                None => return,
                Some(d) => std::thread::sleep(d),
            }
        }
    }
}

/// A configured chat backend: provider plus retry, rate-limit, and cache
/// policy. Cheap to share via `Arc`.
pub struct Backend {
    provider: Box<dyn Provider>,
    pub model_id: String,
    pub temperature: f64,
    retry: RetryPolicy,
    limiter: Option<TokenBucket>,
    cache: Option<DiskCache>,
    provider_calls: AtomicU64,
    session_counter: AtomicU64,
}

impl Backend {
    pub fn new(provider: Box<dyn Provider>, model_id: impl Into<String>, temperature: f64) -> Self {
        Self {
            provider,
            model_id: model_id.into(),
            temperature,
            retry: RetryPolicy::default(),
            limiter: None,
            cache: None,
            provider_calls: AtomicU64::new(0),
            session_counter: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        assert!(retry.max_attempts >= 1);
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: u32) -> Self {
        self.limiter = Some(TokenBucket::new(requests_per_minute));
        self
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn provider_name(&self) -> &'static str {
        self.provider.name()
    }

    /// Provider invocations so far, counting every retry attempt. Cache
    /// hits do not count.
    pub fn provider_calls(&self) -> u64 {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn open_session(self: &Arc<Self>) -> Session {
        let n = self.session_counter.fetch_add(1, Ordering::Relaxed);
        Session {
            session_id: format!("session-{n}"),
            history: Vec::new(),
            backend: Arc::clone(self),
        }
    }

    fn complete_with_policy(&self, history: &[Message]) -> Result<String, BackendError> {
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            match self.provider.complete(history) {
                Ok(response) => return Ok(response),
                Err(ProviderError::Fatal(e)) => {
                    return Err(BackendError::Failure {
                        attempts: attempt,
                        last_error: e,
                    })
                }
                Err(ProviderError::Retryable(e)) => {
                    last_error = e;
                    if attempt < self.retry.max_attempts {
                        let delay = self.retry.backoff_base_ms << (attempt - 1);
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(BackendError::Failure {
            attempts: self.retry.max_attempts,
            last_error,
        })
    }
}

/// One conversation. History alternates user/assistant, starting with
/// user; this holds after every successful or failed `send`.
pub struct Session {
    pub session_id: String,
    pub history: Vec<Message>,
    backend: Arc<Backend>,
}

impl Session {
    /// Appends the user message, obtains the assistant response (from
    /// cache, scripted rule, or remote call), appends it, and returns it.
    /// On failure the user message is rolled back.
    pub fn send(&mut self, message: &str) -> Result<String, BackendError> {
        self.history.push(Message::user(message));
        let key = cache_key(&self.backend.model_id, self.backend.temperature, &self.history);

        if let Some(cache) = &self.backend.cache {
            if let Some(hit) = cache.get(&key) {
                self.history.push(Message::assistant(hit.clone()));
                return Ok(hit);
            }
        }

        match self.backend.complete_with_policy(&self.history) {
            Ok(response) => {
                if let Some(cache) = &self.backend.cache {
                    cache.put(
                        &key,
                        &response,
                        &self.backend.model_id,
                        self.backend.temperature,
                    )?;
                }
                self.history.push(Message::assistant(response.clone()));
                Ok(response)
            }
            Err(e) => {
                self.history.pop();
                Err(e)
            }
        }
    }
}

/// Content-addressed key over the full request: SHA-256 of the canonical
/// serialization (model id, NUL, temperature with six fractional digits,
/// NUL, then role byte + 4-byte big-endian length + content bytes per
/// message). Stable across runs and platforms.
pub fn cache_key(model_id: &str, temperature: f64, history: &[Message]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(format!("{temperature:.6}").as_bytes());
    hasher.update([0u8]);
    for msg in history {
        let role_byte = match msg.role {
            Role::User => 0x01u8,
            Role::Assistant => 0x02u8,
        };
        hasher.update([role_byte]);
        hasher.update((msg.content.len() as u32).to_be_bytes());
        hasher.update(msg.content.as_bytes());
    }
    hex::encode(hasher.finalize())
}
