//! Chat-completion providers.
//!
//! Everything that talks to a model goes through [`ChatProvider`]: a system
//! prompt and user messages in, text and token usage out. Live HTTP, record
//! and replay implementations share that contract so pipeline tests never
//! need the network.

mod cassette;
mod config;
mod http;

pub use cassette::{request_hash, Cassette, RecordingProvider, ReplayProvider};
pub use config::{ApiFlavor, ProviderConfig, ProviderMode};
pub use http::HttpProvider;

use std::ops::{Add, AddAssign};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skills::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub system: String,
    pub messages: Vec<String>,
    pub model: String,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        Self {
            input_tokens,
            output_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage::new(
            self.input_tokens + rhs.input_tokens,
            self.output_tokens + rhs.output_tokens,
        )
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub text: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Decode(String),
    #[error("no recorded response for request {hash}")]
    CassetteMiss { hash: String },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<ProviderError>,
    },
}

impl ProviderError {
    /// Infrastructure hiccups worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    /// Identifier recorded in run records.
    fn id(&self) -> String;

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(request)
    }
}

pub(crate) fn validate_request(request: &ProviderRequest) -> Result<(), ProviderError> {
    if request.system.trim().is_empty() {
        return Err(ProviderError::InvalidRequest(
            "system prompt is empty".into(),
        ));
    }
    Ok(())
}

/// Retries retryable errors with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            attempts: 1,
            initial_backoff: Duration::ZERO,
        }
    }

    pub fn call(
        &self,
        provider: &dyn ChatProvider,
        request: &ProviderRequest,
    ) -> Result<ProviderResponse, ProviderError> {
        let attempts = self.attempts.max(1);
        let mut backoff = self.initial_backoff;
        let mut attempt = 1;
        loop {
            match provider.complete(request) {
                Ok(resp) => return Ok(resp),
                Err(err) if err.is_retryable() && attempt < attempts => {
                    log::warn!(
                        "provider {} attempt {attempt}/{attempts} failed: {err}; retrying in {backoff:?}",
                        provider.id()
                    );
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(err) if err.is_retryable() => {
                    return Err(ProviderError::Exhausted {
                        attempts,
                        last: Box::new(err),
                    })
                }
                Err(err) => return Err(err),
            }
        }
    }
}

/// Model id, sampling parameters and retry policy for one node's calls.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub model: String,
    pub params: GenerationParams,
    pub retry: RetryPolicy,
}

impl ModelSettings {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            params: GenerationParams::default(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn request(&self, system: String, messages: Vec<String>) -> ProviderRequest {
        ProviderRequest {
            system,
            messages,
            model: self.model.clone(),
            params: self.params.clone(),
        }
    }
}

type Responder = dyn Fn(&ProviderRequest) -> Result<String, ProviderError> + Send + Sync;

/// A provider backed by a closure. Usage is estimated from text length.
/// Handy for examples and for producing replay cassettes.
pub struct ScriptedProvider {
    id: String,
    responder: Box<Responder>,
}

impl ScriptedProvider {
    pub fn new<F>(id: impl Into<String>, responder: F) -> Self
    where
        F: Fn(&ProviderRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            responder: Box::new(responder),
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        validate_request(request)?;
        let start = Instant::now();
        let text = (self.responder)(request)?;
        let input: usize = estimate_tokens(&request.system)
            + request
                .messages
                .iter()
                .map(|m| estimate_tokens(m))
                .sum::<usize>();
        Ok(ProviderResponse {
            usage: TokenUsage::new(input as u64, estimate_tokens(&text) as u64),
            text,
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }
}

/// Counts calls that reach the wrapped provider.
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: ChatProvider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<P: ChatProvider> ChatProvider for CountingProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn request() -> ProviderRequest {
        ProviderRequest {
            system: "sys".into(),
            messages: vec!["hi".into()],
            model: "m".into(),
            params: GenerationParams::default(),
        }
    }

    struct Flaky {
        failures: Mutex<Vec<ProviderError>>,
    }

    impl ChatProvider for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }

        fn complete(&self, _: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
            match self.failures.lock().unwrap().pop() {
                Some(e) => Err(e),
                None => Ok(ProviderResponse {
                    text: "ok".into(),
                    usage: TokenUsage::new(1, 1),
                    latency_ms: 0,
                }),
            }
        }
    }

    fn fast(attempts: u32) -> RetryPolicy {
        RetryPolicy {
            attempts,
            initial_backoff: Duration::from_millis(1),
        }
    }

    #[test]
    fn retries_transient_errors() {
        let p = CountingProvider::new(Flaky {
            failures: Mutex::new(vec![ProviderError::Timeout, ProviderError::Timeout]),
        });
        assert_eq!(fast(3).call(&p, &request()).unwrap().text, "ok");
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn timeout_exhausts_policy() {
        let p = CountingProvider::new(Flaky {
            failures: Mutex::new(vec![ProviderError::Timeout; 5]),
        });
        let err = fast(3).call(&p, &request()).unwrap_err();
        assert!(matches!(err, ProviderError::Exhausted { attempts: 3, .. }));
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let p = CountingProvider::new(Flaky {
            failures: Mutex::new(vec![ProviderError::Http {
                status: 401,
                body: "no".into(),
            }]),
        });
        assert!(matches!(
            fast(3).call(&p, &request()),
            Err(ProviderError::Http { status: 401, .. })
        ));
        assert_eq!(p.calls(), 1);
    }

    #[test]
    fn scripted_rejects_empty_system_prompt() {
        let p = ScriptedProvider::new("s", |_| Ok("x".into()));
        let mut req = request();
        req.system = " ".into();
        assert!(matches!(
            p.complete(&req),
            Err(ProviderError::InvalidRequest(_))
        ));
    }

    #[test]
    fn usage_adds() {
        let mut u = TokenUsage::new(1, 2);
        u += TokenUsage::new(10, 20);
        assert_eq!(u, TokenUsage::new(11, 22));
        assert_eq!(u.total(), 33);
    }
}
