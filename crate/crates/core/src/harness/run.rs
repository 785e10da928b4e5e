//! Running a task file through one pipeline.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metric::{compute_metric, example_score, BLEU_NOTE};
use super::{HarnessError, Metric, TaskFile};
use crate::backend::{Counted, LanguageModel, MockBackend};
use crate::tasks::{run_pipeline, ChoiceScore, Flag, PipelineKind, TaskConfig, TraceEntry};

/// Requests that actually reached a backend, as opposed to cache hits.
pub trait CallCounter: Sync {
    fn calls(&self) -> u64;
}

impl<M: LanguageModel> CallCounter for Counted<M> {
    fn calls(&self) -> u64 {
        Counted::calls(self)
    }
}

impl CallCounter for MockBackend {
    fn calls(&self) -> u64 {
        MockBackend::calls(self)
    }
}

/// One example's answer, score and full call trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub input: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_scores: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_index: Option<usize>,
    /// Absent when the example failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_choice: Vec<ChoiceScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Whether the failure came from the backend rather than the task.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub backend_failure: bool,
    pub trace: Vec<TraceEntry>,
}

impl ExampleRecord {
    pub fn is_fallback(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::Fallback(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: String,
    pub pipeline: PipelineKind,
    pub metric: Metric,
    pub metric_note: String,
    /// Mean score over completed examples; absent when none completed.
    pub aggregate: Option<f64>,
    /// Exact-set match reported next to BLEU.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_set: Option<f64>,
    pub examples: usize,
    pub completed: usize,
    pub failures: usize,
    pub fallbacks: usize,
    pub backend_calls: u64,
    pub wall_time_ms: u64,
    pub config: TaskConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: RunSummary,
    pub records: Vec<ExampleRecord>,
}

impl RunReport {
    /// No example finished and at least one was stopped by the backend.
    pub fn backend_exhausted(&self) -> bool {
        self.summary.completed == 0 && self.records.iter().any(|r| r.backend_failure)
    }
}

fn evaluate_one(
    index: usize,
    task: &TaskFile,
    kind: PipelineKind,
    config: &TaskConfig,
    model: &dyn LanguageModel,
) -> (ExampleRecord, Option<f64>) {
    let inst = &task.examples[index];
    let mut record = ExampleRecord {
        index,
        input: inst.input.clone(),
        target_scores: inst.target_scores.clone(),
        targets: inst.targets.clone(),
        chosen: None,
        chosen_index: None,
        score: None,
        per_choice: Vec::new(),
        flags: Vec::new(),
        details: serde_json::Value::Null,
        error: None,
        backend_failure: false,
        trace: Vec::new(),
    };
    let mut exact = None;
    match run_pipeline(kind, inst, config, model) {
        Ok(r) => {
            let o = r.outcome;
            match example_score(task.metric, inst, &o.chosen, o.chosen_index) {
                Ok(s) => record.score = Some(s),
                Err(e) => record.error = Some(e.to_string()),
            }
            if task.metric == Metric::Bleu {
                exact = example_score(Metric::ExactSet, inst, &o.chosen, None).ok();
            }
            record.chosen = Some(o.chosen);
            record.chosen_index = o.chosen_index;
            record.per_choice = o.per_choice;
            record.flags = o.flags;
            record.details = o.details;
            record.trace = r.trace;
        }
        Err(e) => {
            tracing::warn!(index, error = %e.error, "example failed");
            record.backend_failure = e.error.is_backend();
            record.error = Some(e.error.to_string());
            record.trace = e.trace;
        }
    }
    (record, exact)
}

/// Runs every example through the task's pipeline, up to `config.parallelism`
/// examples at a time. Failed examples are recorded and the run goes on.
/// `counter` reports backend requests; without one, traced calls are counted.
pub fn run_evaluation(
    task: &TaskFile,
    config: &TaskConfig,
    model: &dyn LanguageModel,
    counter: Option<&dyn CallCounter>,
) -> Result<RunReport, HarnessError> {
    let kind = task
        .pipeline
        .ok_or_else(|| HarnessError::Invalid(format!("task {:?} names no pipeline", task.name)))?;
    task.validate()?;
    config.validate().map_err(HarnessError::Invalid)?;
    let start = Instant::now();
    let calls_before = counter.map(|c| c.calls());
    let n = task.examples.len();
    let mut slots: Vec<Option<(ExampleRecord, Option<f64>)>> = vec![None; n];
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..config.parallelism.clamp(1, n) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                if tx
                    .send((i, evaluate_one(i, task, kind, config, model)))
                    .is_err()
                {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            slots[i] = Some(r);
        }
    });
    let (records, exact): (Vec<ExampleRecord>, Vec<Option<f64>>) = slots
        .into_iter()
        .map(|s| s.expect("every example reports"))
        .unzip();
    let scores: Vec<f64> = records.iter().filter_map(|r| r.score).collect();
    let exact: Vec<f64> = records
        .iter()
        .zip(&exact)
        .filter(|(r, _)| r.score.is_some())
        .filter_map(|(_, e)| *e)
        .collect();
    let backend_calls = match (counter, calls_before) {
        (Some(c), Some(before)) => c.calls() - before,
        _ => records.iter().map(|r| r.trace.len() as u64).sum(),
    };
    let summary = RunSummary {
        task: task.name.clone(),
        pipeline: kind,
        metric: task.metric,
        metric_note: match task.metric {
            Metric::Accuracy => "fraction of examples whose answer is a best-scoring target".into(),
            Metric::ExactSet => {
                "fraction of examples whose answer set equals a reference set".into()
            }
            Metric::Bleu => BLEU_NOTE.into(),
        },
        aggregate: compute_metric(&scores).ok(),
        exact_set: if task.metric == Metric::Bleu {
            compute_metric(&exact).ok()
        } else {
            None
        },
        examples: n,
        completed: scores.len(),
        failures: n - scores.len(),
        fallbacks: records
            .iter()
            .filter(|r| r.score.is_some() && r.is_fallback())
            .count(),
        backend_calls,
        wall_time_ms: start.elapsed().as_millis() as u64,
        config: config.clone(),
    };
    Ok(RunReport { summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CachedModel, MockTable, ResponseCache};
    use crate::tasks::TaskInstance;
    use std::sync::Arc;

    fn odd_task(n: usize) -> TaskFile {
        let examples = (0..n)
            .map(|i| {
                let odd = format!("z{i}");
                TaskInstance::multiple_choice(
                    &format!("Pick the odd word out: red, blue, green, {odd}"),
                    &["red", "blue", "green", odd.as_str()],
                    3,
                )
            })
            .collect();
        TaskFile {
            name: "odd".into(),
            pipeline: Some(PipelineKind::OddOneOut),
            metric: Metric::Accuracy,
            config: Default::default(),
            metadata: Default::default(),
            examples,
        }
    }

    /// Words starting with "z" relate poorly to everything.
    fn table() -> MockTable {
        MockTable::new()
            .with_fallback(-1.0)
            .with_rule(None, Some("z"), -5.0)
            .with_rule(Some(": z"), None, -5.0)
    }

    fn cfg(parallelism: usize) -> TaskConfig {
        TaskConfig {
            parallelism,
            ..TaskConfig::default()
        }
    }

    #[test]
    fn all_correct() {
        let mock = MockBackend::new(table()).unwrap();
        let r = run_evaluation(&odd_task(10), &cfg(4), &mock, Some(&mock)).unwrap();
        assert_eq!(r.summary.aggregate, Some(1.0));
        assert_eq!(r.summary.failures, 0);
        assert_eq!(
            r.summary.backend_calls,
            r.records.iter().map(|x| x.trace.len() as u64).sum::<u64>()
        );
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let mut t = table();
        t.unreachable.push("z3".into());
        let mock = MockBackend::new(t).unwrap();
        let r = run_evaluation(&odd_task(10), &cfg(2), &mock, None).unwrap();
        assert_eq!(r.summary.failures, 1);
        assert_eq!(r.summary.completed, 9);
        assert_eq!(r.summary.aggregate, Some(1.0));
        assert!(r.records[3].backend_failure);
        assert!(!r.records[3].trace.is_empty());
        assert!(!r.backend_exhausted());
    }

    #[test]
    fn think_failure_shows_as_fallback() {
        let mut task = odd_task(10);
        task.pipeline = Some(PipelineKind::Sports);
        for (i, e) in task.examples.iter_mut().enumerate() {
            let action = if i == 0 { "sneezed" } else { "caught the ball" };
            *e = TaskInstance::multiple_choice(
                &format!("Statement: Tom Brady {action}."),
                &["plausible", "implausible"],
                0,
            );
        }
        let t = MockTable::new().with_script_rule("players who caught", " A B\n2. C D\n3. E F");
        let mock = MockBackend::new(t).unwrap();
        let r = run_evaluation(&task, &cfg(1), &mock, None).unwrap();
        assert_eq!(r.summary.fallbacks, 1);
        assert!(r.records[0].is_fallback());
        assert_eq!(r.summary.failures, 0);
    }

    #[test]
    fn parallelism_is_transparent() {
        let one = run_evaluation(
            &odd_task(6),
            &cfg(1),
            &MockBackend::new(table()).unwrap(),
            None,
        )
        .unwrap();
        let eight = run_evaluation(
            &odd_task(6),
            &cfg(8),
            &MockBackend::new(table()).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(one.records, eight.records);
    }

    #[test]
    fn cached_rerun_reaches_no_backend() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let run = || {
            let counted = Counted::new(MockBackend::new(table()).unwrap());
            let cached = CachedModel::new(&counted, Arc::new(ResponseCache::open(&path).unwrap()));
            run_evaluation(&odd_task(5), &cfg(3), &cached, Some(&counted)).unwrap()
        };
        let first = run();
        let second = run();
        assert!(first.summary.backend_calls > 0);
        assert_eq!(second.summary.backend_calls, 0);
        assert_eq!(first.records, second.records);
    }
}
