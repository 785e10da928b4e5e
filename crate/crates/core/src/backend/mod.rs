//! Uniform scoring and generation over language models.
//!
//! Every Sum computation bottoms out in [`ScoredQuery`] values produced
//! here. Scores are natural-log probabilities kept in log space; callers
//! only exponentiate at normalization boundaries.

mod cache;
mod mock;
mod remote;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cache_key, CacheRecord, CachedModel, ResponseCache};
pub use mock::{
    MockBackend, MockEntry, MockRule, MockScript, MockScriptRule, MockTable,
    DEFAULT_FALLBACK_LOGPROB,
};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};

/// Default cap on concurrently in-flight backend requests.
pub const DEFAULT_PARALLELISM: usize = 8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("empty generation for prompt {0:?}")]
    EmptyGeneration(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache store error: {0}")]
    Cache(String),
}

impl BackendError {
    /// Transient failures are worth retrying; everything else is fatal for the call.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Unreachable(_))
    }
}

/// Sampling settings for [`LanguageModel::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 100,
            stop_sequences: Vec::new(),
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn greedy(max_tokens: u32) -> Self {
        Self {
            max_tokens,
            ..Self::default()
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable hex digest of every field; part of the cache key for generations.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("temperature={:?}\u{1f}", self.temperature));
        hasher.update(format!("max_tokens={}\u{1f}", self.max_tokens));
        for stop in &self.stop_sequences {
            hasher.update(format!("stop={stop:?}\u{1f}"));
        }
        hasher.update(format!("seed={:?}", self.seed));
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

/// One (prompt, continuation) pair with its log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuery {
    pub prompt: String,
    pub continuation: String,
    pub log_likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_token: Option<Vec<TokenLogprob>>,
}

impl ScoredQuery {
    pub fn new(prompt: &str, continuation: &str, log_likelihood: f64) -> Self {
        Self {
            prompt: prompt.to_string(),
            continuation: continuation.to_string(),
            log_likelihood,
            per_token: None,
        }
    }

    /// Builds a query whose total is the sum of its token scores.
    pub fn from_tokens(prompt: &str, continuation: &str, tokens: Vec<TokenLogprob>) -> Self {
        let log_likelihood = tokens.iter().map(|t| t.logprob).sum();
        Self {
            prompt: prompt.to_string(),
            continuation: continuation.to_string(),
            log_likelihood,
            per_token: Some(tokens),
        }
    }

    /// Number of scoring units: backend tokens when known, else whitespace words.
    pub fn length(&self) -> usize {
        match &self.per_token {
            Some(tokens) if !tokens.is_empty() => tokens.len(),
            _ => self.continuation.split_whitespace().count().max(1),
        }
    }

    pub fn score(&self, normalization: LengthNormalization) -> f64 {
        match normalization {
            LengthNormalization::Total => self.log_likelihood,
            LengthNormalization::PerToken => self.log_likelihood / self.length() as f64,
        }
    }
}

/// Whether candidate scores are divided by their length before comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthNormalization {
    #[default]
    Total,
    PerToken,
}

/// A scoring and generation backend.
///
/// Implementations must be safe to share across threads; pipelines fan
/// queries out concurrently through [`batch_score`].
pub trait LanguageModel: Send + Sync {
    /// Identifier folded into cache keys.
    fn id(&self) -> String;

    /// `log p(continuation | prompt)`.
    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError>;

    /// Continuation text, truncated at the first stop sequence.
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;

    /// Unconditional `log p(text)`.
    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        self.score_continuation("", text)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn id(&self) -> String {
        (**self).id()
    }
    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        (**self).score_continuation(prompt, continuation)
    }
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        (**self).score_full(text)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        (**self).score_continuation(prompt, continuation)
    }
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        (**self).score_full(text)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Box<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        (**self).score_continuation(prompt, continuation)
    }
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        (**self).score_full(text)
    }
}

pub(crate) fn check_continuation(continuation: &str) -> Result<(), BackendError> {
    if continuation.is_empty() {
        Err(BackendError::InvalidRequest(
            "continuation must be non-empty".into(),
        ))
    } else {
        Ok(())
    }
}

/// Cuts `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

/// Scores every query with at most `parallelism` requests in flight.
///
/// Output index `i` always corresponds to input index `i`; a failing query
/// yields an error in its slot without aborting the rest of the batch.
pub fn batch_score<M: LanguageModel + ?Sized>(
    model: &M,
    queries: &[(String, String)],
    parallelism: usize,
) -> Vec<Result<ScoredQuery, BackendError>> {
    let workers = parallelism.max(1).min(queries.len());
    if workers <= 1 {
        return queries
            .iter()
            .map(|(p, c)| model.score_continuation(p, c))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<ScoredQuery, BackendError>>> = vec![None; queries.len()];
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= queries.len() {
                    break;
                }
                let (p, c) = &queries[i];
                let r = model.score_continuation(p, c);
                results.lock().expect("batch result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every batch slot is filled"))
        .collect()
}

/// Wraps a model and counts every scoring or generation call that reaches it.
pub struct Counted<M> {
    inner: M,
    calls: AtomicU64,
}

impl<M: LanguageModel> Counted<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for Counted<M> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score_continuation(prompt, continuation)
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(prompt, params)
    }

    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score_full(text)
    }
}
