//! Persistent response cache backed by a JSON-lines file.
//!
//! Each line is one [`CacheRecord`]. Later records for the same key win.
//! Unreadable lines are dropped when the store is opened and the file is
//! rewritten without them, so a corrupt record behaves like a miss.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    check_continuation, BackendError, GenerationParams, LanguageModel, ScoredQuery, TokenLogprob,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub prompt: String,
    /// `None` marks a generation record.
    pub continuation: Option<String>,
    pub params_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_token: Option<Vec<TokenLogprob>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<String>,
    pub timestamp: u64,
}

impl CacheRecord {
    fn is_well_formed(&self) -> bool {
        match (&self.continuation, self.logprob, &self.generation) {
            (Some(_), Some(lp), None) => !lp.is_nan(),
            (None, None, Some(_)) => self.params_digest.is_some(),
            _ => false,
        }
    }
}

/// Digest of (backend id, prompt, continuation or generation marker, params).
pub fn cache_key(
    backend_id: &str,
    prompt: &str,
    continuation: Option<&str>,
    params: Option<&GenerationParams>,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(backend_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(prompt.as_bytes());
    hasher.update([0x1f]);
    match continuation {
        Some(c) => {
            hasher.update(b"score\x1e");
            hasher.update(c.as_bytes());
        }
        None => hasher.update(b"generate\x1e"),
    }
    hasher.update([0x1f]);
    if let Some(p) = params {
        hasher.update(p.digest().as_bytes());
    }
    hex::encode(hasher.finalize())
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct ResponseCache {
    path: PathBuf,
    records: Mutex<HashMap<String, CacheRecord>>,
    writer: Mutex<File>,
    dropped: usize,
}

impl std::fmt::Debug for ResponseCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResponseCache")
            .field("path", &self.path)
            .field("records", &self.len())
            .finish()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Cache(format!("{}: {e}", path.display()))
}

impl ResponseCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let mut records = HashMap::new();
        let mut order = Vec::new();
        let mut dropped = 0;
        if path.exists() {
            let file = File::open(&path).map_err(|e| io_err(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| io_err(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) if rec.is_well_formed() => {
                        if !records.contains_key(&rec.key) {
                            order.push(rec.key.clone());
                        }
                        records.insert(rec.key.clone(), rec);
                    }
                    _ => dropped += 1,
                }
            }
        }
        if dropped > 0 {
            tracing::warn!(path = %path.display(), dropped, "discarding corrupt cache records");
            let tmp = path.with_extension("rewrite.tmp");
            {
                let mut out = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
                for key in &order {
                    let line = serde_json::to_string(&records[key])
                        .map_err(|e| BackendError::Cache(e.to_string()))?;
                    writeln!(out, "{line}").map_err(|e| io_err(&tmp, e))?;
                }
                out.sync_all().map_err(|e| io_err(&tmp, e))?;
            }
            fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        Ok(Self {
            path,
            records: Mutex::new(records),
            writer: Mutex::new(writer),
            dropped,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Corrupt lines discarded when the store was opened.
    pub fn dropped_on_open(&self) -> usize {
        self.dropped
    }

    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        self.records.lock().expect("cache lock").get(key).cloned()
    }

    /// Appends one record as a single write and makes it visible to readers.
    pub fn put(&self, record: CacheRecord) -> Result<(), BackendError> {
        let mut line =
            serde_json::to_string(&record).map_err(|e| BackendError::Cache(e.to_string()))?;
        line.push('\n');
        {
            let mut w = self.writer.lock().expect("cache writer lock");
            w.write_all(line.as_bytes())
                .map_err(|e| io_err(&self.path, e))?;
            w.flush().map_err(|e| io_err(&self.path, e))?;
        }
        self.records
            .lock()
            .expect("cache lock")
            .insert(record.key.clone(), record);
        Ok(())
    }
}

/// A model whose calls are served from a [`ResponseCache`] when possible.
pub struct CachedModel<M> {
    inner: M,
    cache: std::sync::Arc<ResponseCache>,
}

impl<M: LanguageModel> CachedModel<M> {
    pub fn new(inner: M, cache: std::sync::Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for CachedModel<M> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<ScoredQuery, BackendError> {
        check_continuation(continuation)?;
        let key = cache_key(&self.inner.id(), prompt, Some(continuation), None);
        if let Some(rec) = self.cache.get(&key) {
            if rec.prompt == prompt && rec.continuation.as_deref() == Some(continuation) {
                if let Some(lp) = rec.logprob {
                    return Ok(ScoredQuery {
                        prompt: rec.prompt,
                        continuation: continuation.to_string(),
                        log_likelihood: lp,
                        per_token: rec.per_token,
                    });
                }
            }
        }
        let scored = self.inner.score_continuation(prompt, continuation)?;
        self.cache.put(CacheRecord {
            key,
            prompt: prompt.to_string(),
            continuation: Some(continuation.to_string()),
            params_digest: None,
            logprob: Some(scored.log_likelihood),
            per_token: scored.per_token.clone(),
            generation: None,
            timestamp: now_secs(),
        })?;
        Ok(scored)
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        params.validate()?;
        let key = cache_key(&self.inner.id(), prompt, None, Some(params));
        let digest = params.digest();
        if let Some(rec) = self.cache.get(&key) {
            if rec.prompt == prompt && rec.params_digest.as_deref() == Some(digest.as_str()) {
                if let Some(text) = rec.generation {
                    return Ok(text);
                }
            }
        }
        let text = self.inner.generate(prompt, params)?;
        self.cache.put(CacheRecord {
            key,
            prompt: prompt.to_string(),
            continuation: None,
            params_digest: Some(digest),
            logprob: None,
            per_token: None,
            generation: Some(text.clone()),
            timestamp: now_secs(),
        })?;
        Ok(text)
    }

    fn score_full(&self, text: &str) -> Result<ScoredQuery, BackendError> {
        self.score_continuation("", text)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::{MockBackend, MockTable};

    fn mock() -> MockBackend {
        MockBackend::new(
            MockTable::new()
                .with_entry("p", "c", -1.25)
                .with_script("g", "generated text"),
        )
        .unwrap()
    }

    #[test]
    fn key_is_pure_and_input_sensitive() {
        let a = cache_key("m", "p", Some("c"), None);
        assert_eq!(a, cache_key("m", "p", Some("c"), None));
        assert_ne!(a, cache_key("m2", "p", Some("c"), None));
        assert_ne!(
            a,
            cache_key("m", "p", None, Some(&GenerationParams::default()))
        );
        // separator prevents prompt/continuation boundary collisions
        assert_ne!(
            cache_key("m", "ab", Some("c"), None),
            cache_key("m", "a", Some("bc"), None)
        );
    }

    #[test]
    fn second_identical_call_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let backend = mock();
        let model = CachedModel::new(&backend, cache);
        let a = model.score_continuation("p", "c").unwrap();
        let b = model.score_continuation("p", "c").unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.calls(), 1);
        model.score_full("x").unwrap();
        model.score_full("x").unwrap();
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn params_change_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let backend = mock();
        let model = CachedModel::new(&backend, cache);
        let greedy = GenerationParams::default();
        model.generate("g", &greedy).unwrap();
        model.generate("g", &greedy).unwrap();
        assert_eq!(backend.calls(), 1);
        model
            .generate("g", &greedy.clone().with_temperature(0.5))
            .unwrap();
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn persists_across_reopen_and_deleting_file_forces_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let backend = mock();
        {
            let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
            model.score_continuation("p", "c").unwrap();
        }
        {
            let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
            model.score_continuation("p", "c").unwrap();
        }
        assert_eq!(backend.calls(), 1);
        fs::remove_file(&path).unwrap();
        let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
        model.score_continuation("p", "c").unwrap();
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn corrupt_record_is_a_miss_and_gets_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let backend = mock();
        {
            let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
            model.score_continuation("p", "c").unwrap();
        }
        // truncate the only record mid-line
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        let cache = Arc::new(ResponseCache::open(&path).unwrap());
        assert_eq!(cache.dropped_on_open(), 1);
        assert!(cache.is_empty());
        let model = CachedModel::new(&backend, cache);
        assert_eq!(
            model.score_continuation("p", "c").unwrap().log_likelihood,
            -1.25
        );
        assert_eq!(backend.calls(), 2);
        let reopened = ResponseCache::open(&path).unwrap();
        assert_eq!(reopened.dropped_on_open(), 0);
        assert_eq!(reopened.len(), 1);
    }

    #[test]
    fn record_layout_is_one_json_object_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let backend = mock();
        let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
        model.score_continuation("p", "c").unwrap();
        model.generate("g", &GenerationParams::default()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        for field in [
            "key",
            "prompt",
            "continuation",
            "params_digest",
            "timestamp",
        ] {
            assert!(lines[0].get(field).is_some(), "missing {field}");
        }
        assert_eq!(lines[0]["logprob"], serde_json::json!(-1.25));
        assert_eq!(lines[1]["generation"], serde_json::json!("generated text"));
        assert!(lines[1]["continuation"].is_null());
    }

    #[test]
    fn cached_scores_are_bitwise_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let awkward = 0.1f64.ln() + 1e-17;
        let backend = MockBackend::new(MockTable::new().with_entry("p", "c", awkward)).unwrap();
        {
            let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
            model.score_continuation("p", "c").unwrap();
        }
        let model = CachedModel::new(&backend, Arc::new(ResponseCache::open(&path).unwrap()));
        let cached = model.score_continuation("p", "c").unwrap().log_likelihood;
        assert_eq!(cached.to_bits(), awkward.to_bits());
    }
}
