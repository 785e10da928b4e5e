//! Task files in the BIG-bench JSON layout.

use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{HarnessError, Metric};
use crate::tasks::{PipelineKind, TaskConfig, TaskInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskFile {
    pub name: String,
    /// Pipeline named by the file, or inferred from the task name.
    pub pipeline: Option<PipelineKind>,
    pub metric: Metric,
    /// Hyperparameter overrides, applied over the run configuration.
    pub config: Map<String, Value>,
    pub metadata: Map<String, Value>,
    pub examples: Vec<TaskInstance>,
}

#[derive(Deserialize)]
struct RawTask {
    name: String,
    #[serde(default)]
    pipeline: Option<String>,
    #[serde(default)]
    metric: Option<String>,
    #[serde(default)]
    config: Map<String, Value>,
    #[serde(default)]
    metadata: Map<String, Value>,
    examples: Vec<RawExample>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Targets {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct RawExample {
    input: String,
    #[serde(default)]
    target_scores: Option<Map<String, Value>>,
    #[serde(default)]
    target: Option<Targets>,
    #[serde(default)]
    metadata: Map<String, Value>,
}

fn field(index: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Field {
        index,
        message: message.into(),
    }
}

fn convert(
    index: usize,
    raw: RawExample,
    shared: &Map<String, Value>,
) -> Result<TaskInstance, HarnessError> {
    let mut target_scores = Vec::new();
    for (choice, v) in raw.target_scores.unwrap_or_default() {
        let score = v
            .as_f64()
            .ok_or_else(|| field(index, format!("target_scores[{choice:?}] is not a number")))?;
        target_scores.push((choice, score));
    }
    let targets = match raw.target {
        None => Vec::new(),
        Some(Targets::One(t)) => vec![t],
        Some(Targets::Many(ts)) => ts,
    };
    let mut metadata = shared.clone();
    metadata.extend(raw.metadata);
    Ok(TaskInstance {
        input: raw.input,
        choices: target_scores.iter().map(|t| t.0.clone()).collect(),
        target_scores,
        targets,
        metadata,
    })
}

impl TaskFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let raw: RawTask = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let pipeline = match &raw.pipeline {
            Some(p) => Some(p.parse().map_err(HarnessError::UnknownTaskKind)?),
            None => raw.name.replace('_', "-").parse().ok(),
        };
        let metric = match &raw.metric {
            Some(m) => m.parse().map_err(HarnessError::Invalid)?,
            None => Metric::default_for(pipeline),
        };
        let examples = raw
            .examples
            .into_iter()
            .enumerate()
            .map(|(i, e)| convert(i, e, &raw.metadata))
            .collect::<Result<Vec<_>, _>>()?;
        let task = TaskFile {
            name: raw.name,
            pipeline,
            metric,
            config: raw.config,
            metadata: raw.metadata,
            examples,
        };
        task.validate()?;
        Ok(task)
    }

    /// Checks the examples against the pipeline, when one is known.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.examples.is_empty() {
            return Err(HarnessError::Invalid(format!(
                "task {:?} has no examples",
                self.name
            )));
        }
        let Some(kind) = self.pipeline else {
            return Ok(());
        };
        if !self.metric.valid_for(kind) {
            return Err(HarnessError::Invalid(format!(
                "metric {} does not apply to the multiple-choice pipeline {kind}",
                self.metric
            )));
        }
        for (i, e) in self.examples.iter().enumerate() {
            if kind.is_multiple_choice() && e.target_scores.is_empty() {
                return Err(field(
                    i,
                    format!("missing target_scores, which {kind} needs"),
                ));
            }
            if !kind.is_multiple_choice() && e.targets.is_empty() {
                return Err(field(i, format!("missing target, which {kind} needs")));
            }
        }
        Ok(())
    }

    /// The same task run through another pipeline; the default metric follows.
    pub fn with_pipeline(mut self, kind: PipelineKind) -> Result<Self, HarnessError> {
        if self.pipeline != Some(kind) && self.metric == Metric::default_for(self.pipeline) {
            self.metric = Metric::default_for(Some(kind));
        }
        self.pipeline = Some(kind);
        self.validate()?;
        Ok(self)
    }

    /// `base` with this file's overrides on top.
    pub fn apply_config(&self, base: &TaskConfig) -> Result<TaskConfig, HarnessError> {
        merge_config(base, &self.config)
    }
}

/// Overwrites top-level fields of `base` with the given JSON values.
pub fn merge_config(
    base: &TaskConfig,
    overrides: &Map<String, Value>,
) -> Result<TaskConfig, HarnessError> {
    if overrides.is_empty() {
        return Ok(base.clone());
    }
    let mut v = serde_json::to_value(base).map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let obj = v.as_object_mut().expect("config serializes to an object");
    for (k, val) in overrides {
        if !obj.contains_key(k) {
            return Err(HarnessError::Invalid(format!("unknown config field {k:?}")));
        }
        obj.insert(k.clone(), val.clone());
    }
    let merged: TaskConfig =
        serde_json::from_value(v).map_err(|e| HarnessError::Invalid(format!("config: {e}")))?;
    merged.validate().map_err(HarnessError::Invalid)?;
    Ok(merged)
}

pub fn load_task_file(path: impl AsRef<Path>) -> Result<TaskFile, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    TaskFile::parse(&text)
}
