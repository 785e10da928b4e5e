//! Deterministic table-driven backend used by tests and fixtures.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    check_continuation, truncate_at_stop, BackendError, GenerationParams, LanguageModel,
    ScoredQuery,
};

/// Floor used for pairs the table does not list.
pub const DEFAULT_FALLBACK_LOGPROB: f64 = -20.723265836946414; // ln 1e-9

fn default_fallback() -> f64 {
    DEFAULT_FALLBACK_LOGPROB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub prompt: String,
    pub continuation: String,
    pub logprob: f64,
}

/// Additive adjustment applied to unlisted pairs whose text matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_contains: Option<String>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub prompt: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScriptRule {
    pub prompt_contains: String,
    pub output: String,
}

/// Conditional log-probabilities and scripted generations.
///
/// Lookup order for scoring: exact `(prompt, continuation)` entry, else the
/// fallback plus the deltas of every matching rule. Generation uses an exact
/// script, else the first matching script rule, else an empty output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockTable {
    #[serde(default = "default_fallback")]
    pub fallback_logprob: f64,
    #[serde(default)]
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub scripts: Vec<MockScript>,
    #[serde(default)]
    pub script_rules: Vec<MockScriptRule>,
    /// Prompts or continuations containing any of these substrings fail as unreachable.
    #[serde(default)]
    pub unreachable: Vec<String>,
}

impl Default for MockTable {
    fn default() -> Self {
        Self {
            fallback_logprob: DEFAULT_FALLBACK_LOGPROB,
            entries: Vec::new(),
            rules: Vec::new(),
            scripts: Vec::new(),
            script_rules: Vec::new(),
            unreachable: Vec::new(),
        }
    }
}

impl MockTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fallback(mut self, logprob: f64) -> Self {
        self.fallback_logprob = logprob;
        self
    }

    pub fn with_entry(mut self, prompt: &str, continuation: &str, logprob: f64) -> Self {
        self.entries.push(MockEntry {
            prompt: prompt.into(),
            continuation: continuation.into(),
            logprob,
        });
        self
    }

    /// Entry for the unconditional score of `text`.
    pub fn with_full(self, text: &str, logprob: f64) -> Self {
        self.with_entry("", text, logprob)
    }

    pub fn with_rule(
        mut self,
        prompt_contains: Option<&str>,
        continuation_contains: Option<&str>,
        delta: f64,
    ) -> Self {
        self.rules.push(MockRule {
            prompt_contains: prompt_contains.map(str::to_string),
            continuation_contains: continuation_contains.map(str::to_string),
            delta,
        });
        self
    }

    pub fn with_script(mut self, prompt: &str, output: &str) -> Self {
        self.scripts.push(MockScript {
            prompt: prompt.into(),
            output: output.into(),
        });
        self
    }

    pub fn with_script_rule(mut self, prompt_contains: &str, output: &str) -> Self {
        self.script_rules.push(MockScriptRule {
            prompt_contains: prompt_contains.into(),
            output: output.into(),
        });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub struct MockBackend {
    table: MockTable,
    entries: HashMap<(String, String), f64>,
    scripts: HashMap<String, String>,
    digest: String,
    calls: AtomicU64,
}

impl std::fmt::Debug for MockBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockBackend")
            .field("entries", &self.entries.len())
            .field("scripts", &self.scripts.len())
            .field("calls", &self.calls())
            .finish()
    }
}

impl MockBackend {
    pub fn new(table: MockTable) -> Result<Self, BackendError> {
        if !table.fallback_logprob.is_finite() {
            return Err(BackendError::InvalidRequest(
                "mock fallback log-probability must be finite".into(),
            ));
        }
        let mut entries = HashMap::new();
        for e in &table.entries {
            entries.insert((e.prompt.clone(), e.continuation.clone()), e.logprob);
        }
        let mut scripts = HashMap::new();
        for s in &table.scripts {
            scripts.insert(s.prompt.clone(), s.output.clone());
        }
        let encoded =
            serde_json::to_vec(&table).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let digest = hex::encode(&Sha256::digest(&encoded)[..8]);
        Ok(Self {
            table,
            entries,
            scripts,
            digest,
            calls: AtomicU64::new(0),
        })
    }

    pub fn table(&self) -> &MockTable {
        &self.table
    }

    /// Total scoring and generation calls served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn check_reachable(&self, prompt: &str, other: &str) -> Result<(), BackendError> {
        match self
            .table
            .unreachable
            .iter()
            .find(|s| prompt.contains(s.as_str()) || other.contains(s.as_str()))
        {
            Some(s) => Err(BackendError::Unreachable(format!(
                "simulated outage for {s:?}"
            ))),
            None => Ok(()),
        }
    }

    fn lookup(&self, prompt: &str, continuation: &str) -> f64 {
        if let Some(lp) = self
            .entries
            .get(&(prompt.to_string(), continuation.to_string()))
        {
            return *lp;
        }
        self.table
            .rules
            .iter()
            .fold(self.table.fallback_logprob, |acc, rule| {
                let prompt_ok = rule
                    .prompt_contains
                    .as_deref()
                    .map_or(true, |s| prompt.contains(s));
                let cont_ok = rule
                    .continuation_contains
                    .as_deref()
                    .map_or(true, |s| continuation.contains(s));
                if prompt_ok && cont_ok {
                    acc + rule.delta
                } else {
                    acc
                }
            })
    }
}

/// Keeps at most `n` whitespace-delimited words, preserving the original spacing.
fn truncate_words(text: &str, n: usize) -> &str {
    let mut seen = 0;
    let mut in_word = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            seen += 1;
            if seen > n {
                return text[..i].trim_end();
            }
        }
    }
    text
}

impl LanguageModel for MockBackend {
    fn id(&self) -> String {
        format!("mock:{}", self.digest)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        check_continuation(continuation)?;
        self.check_reachable(prompt, continuation)?;
        Ok(ScoredQuery::new(
            prompt,
            continuation,
            self.lookup(prompt, continuation),
        ))
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        params.validate()?;
        self.check_reachable(prompt, "")?;
        let raw = self.scripts.get(prompt).map(String::as_str).or_else(|| {
            self.table
                .script_rules
                .iter()
                .find(|r| prompt.contains(r.prompt_contains.as_str()))
                .map(|r| r.output.as_str())
        });
        let raw = raw.unwrap_or("");
        let out = truncate_words(
            truncate_at_stop(raw, &params.stop_sequences),
            params.max_tokens as usize,
        );
        if out.trim().is_empty() {
            return Err(BackendError::EmptyGeneration(prompt.to_string()));
        }
        Ok(out.to_string())
    }
}
