//! A recording view over a backend: every call a pipeline makes lands in its trace.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::{batch_score, BackendError, GenerationParams, LanguageModel, ScoredQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum TraceEntry {
    Score {
        prompt: String,
        continuation: String,
        log_likelihood: f64,
    },
    Generate {
        prompt: String,
        params: GenerationParams,
        output: String,
    },
    Error {
        prompt: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        continuation: Option<String>,
        message: String,
    },
}

pub struct Session<'m> {
    model: &'m dyn LanguageModel,
    parallelism: usize,
    trace: Mutex<Vec<TraceEntry>>,
}

impl<'m> Session<'m> {
    pub fn new(model: &'m dyn LanguageModel, parallelism: usize) -> Self {
        Self {
            model,
            parallelism: parallelism.max(1),
            trace: Mutex::new(Vec::new()),
        }
    }

    fn record(&self, entry: TraceEntry) {
        self.trace.lock().expect("trace lock").push(entry);
    }

    fn record_score(
        &self,
        prompt: &str,
        continuation: &str,
        r: &Result<ScoredQuery, BackendError>,
    ) {
        self.record(match r {
            Ok(q) => TraceEntry::Score {
                prompt: prompt.to_string(),
                continuation: continuation.to_string(),
                log_likelihood: q.log_likelihood,
            },
            Err(e) => TraceEntry::Error {
                prompt: prompt.to_string(),
                continuation: Some(continuation.to_string()),
                message: e.to_string(),
            },
        });
    }

    /// Scores all queries concurrently; the trace keeps input order.
    pub fn score_batch(
        &self,
        queries: &[(String, String)],
    ) -> Result<Vec<ScoredQuery>, BackendError> {
        let results = batch_score(self.model, queries, self.parallelism);
        for ((p, c), r) in queries.iter().zip(&results) {
            self.record_score(p, c, r);
        }
        results.into_iter().collect()
    }

    /// Unconditional scores of each text, batched.
    pub fn score_full_batch(&self, texts: &[String]) -> Result<Vec<ScoredQuery>, BackendError> {
        let queries: Vec<(String, String)> =
            texts.iter().map(|t| (String::new(), t.clone())).collect();
        self.score_batch(&queries)
    }

    pub fn calls(&self) -> usize {
        self.trace.lock().expect("trace lock").len()
    }

    pub fn into_trace(self) -> Vec<TraceEntry> {
        self.trace.into_inner().expect("trace lock")
    }
}

impl LanguageModel for Session<'_> {
    fn id(&self) -> String {
        self.model.id()
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        let r = self.model.score_continuation(prompt, continuation);
        self.record_score(prompt, continuation, &r);
        r
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let r = self.model.generate(prompt, params);
        self.record(match &r {
            Ok(output) => TraceEntry::Generate {
                prompt: prompt.to_string(),
                params: params.clone(),
                output: output.clone(),
            },
            Err(e) => TraceEntry::Error {
                prompt: prompt.to_string(),
                continuation: None,
                message: e.to_string(),
            },
        });
        r
    }

    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        let r = self.model.score_full(text);
        self.record_score("", text, &r);
        r
    }
}
