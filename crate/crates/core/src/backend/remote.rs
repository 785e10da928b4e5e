//! HTTP completion-endpoint backend.
//!
//! Scoring sends `prompt + continuation` with `echo` and per-token
//! log-probabilities enabled, then sums the scores of the tokens that
//! overlap the continuation, located through the returned character offsets.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    check_continuation, truncate_at_stop, BackendError, GenerationParams, LanguageModel,
    ScoredQuery, TokenLogprob, DEFAULT_PARALLELISM,
};

/// Environment variable holding the bearer credential.
pub const API_KEY_ENV: &str = "THINKSUM_API_KEY";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    /// Prefix used as context when scoring text unconditionally; echoed
    /// completions assign no score to the very first token.
    pub bos_text: String,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_in_flight: DEFAULT_PARALLELISM,
            retries: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
            bos_text: "<|endoftext|>".to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<u32>,
    echo: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Debug, Deserialize)]
struct CompletionChoice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Debug, Deserialize)]
struct ChoiceLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Vec<usize>,
}

struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.available.wait(n).expect("semaphore wait");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.available.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::InvalidRequest(
                "remote endpoint URL is empty".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            in_flight,
        })
    }

    fn post_once(&self, body: &CompletionRequest<'_>) -> Result<CompletionResponse, BackendError> {
        let _permit = self.in_flight.acquire();
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Unreachable(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::MalformedResponse(format!(
                "HTTP {status}: {text}"
            )));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse(e.to_string()))
    }

    fn post(&self, body: &CompletionRequest<'_>) -> Result<CompletionResponse, BackendError> {
        let mut attempt = 0;
        loop {
            match self.post_once(body) {
                Err(e) if e.is_transient() && attempt < self.config.retries => {
                    let wait = self.config.initial_backoff * 2u32.pow(attempt);
                    tracing::warn!(attempt, ?wait, error = %e, "retrying completion request");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Tokens overlapping the character range `[start, end)` of the echoed text.
fn continuation_tokens(
    logprobs: &ChoiceLogprobs,
    start: usize,
    end: usize,
) -> Result<Vec<TokenLogprob>, BackendError> {
    let n = logprobs.tokens.len();
    if logprobs.token_logprobs.len() != n || logprobs.text_offset.len() != n {
        return Err(BackendError::MalformedResponse(
            "tokens, token_logprobs and text_offset differ in length".into(),
        ));
    }
    let mut out = Vec::new();
    for i in 0..n {
        let offset = logprobs.text_offset[i];
        let token_end = offset + logprobs.tokens[i].chars().count();
        if offset >= end || token_end <= start {
            continue;
        }
        match logprobs.token_logprobs[i] {
            Some(lp) if lp.is_finite() => out.push(TokenLogprob {
                token: logprobs.tokens[i].clone(),
                logprob: lp,
            }),
            _ => {
                return Err(BackendError::MalformedResponse(format!(
                    "continuation token {i} has no log-probability"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(BackendError::MalformedResponse(
            "no tokens cover the continuation".into(),
        ));
    }
    Ok(out)
}

impl LanguageModel for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.config.endpoint, self.config.model)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        check_continuation(continuation)?;
        let context = if prompt.is_empty() {
            self.config.bos_text.as_str()
        } else {
            prompt
        };
        let full = format!("{context}{continuation}");
        let body = CompletionRequest {
            model: &self.config.model,
            prompt: &full,
            max_tokens: 0,
            temperature: 0.0,
            logprobs: Some(1),
            echo: true,
            stop: None,
            seed: None,
        };
        let resp = self.post(&body)?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
        let logprobs = choice
            .logprobs
            .ok_or_else(|| BackendError::MalformedResponse("missing logprobs".into()))?;
        let start = context.chars().count();
        let end = start + continuation.chars().count();
        let tokens = continuation_tokens(&logprobs, start, end)?;
        Ok(ScoredQuery::from_tokens(prompt, continuation, tokens))
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        params.validate()?;
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
            logprobs: None,
            echo: false,
            stop: if params.stop_sequences.is_empty() {
                None
            } else {
                Some(&params.stop_sequences)
            },
            seed: params.seed,
        };
        let resp = self.post(&body)?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
        let text = truncate_at_stop(&choice.text, &params.stop_sequences);
        if text.trim().is_empty() {
            return Err(BackendError::EmptyGeneration(prompt.to_string()));
        }
        Ok(text.to_string())
    }
}
