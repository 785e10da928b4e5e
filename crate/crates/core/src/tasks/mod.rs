//! Task pipelines: Think and Sum steps composed per benchmark task.

mod baseline;
mod config;
mod deduction;
mod instance;
mod inversion;
mod qa;
mod relatedness;
mod session;
mod substitution;
mod threshold;
mod truth;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{BackendError, GenerationParams, LanguageModel};
use crate::sum::{argmax, posterior_normalize, SumError};
use crate::think::ThinkError;

pub use baseline::{solve_baseline, BaselineKind};
pub use config::{EvaluatorChoice, PipelineKind, TaskConfig};
pub use deduction::solve_logical_deduction;
pub use instance::{
    codenames_fields, deduction_objects, emoji_clusters, nonce_definitions, normalize_answer,
    numbered_items, player_and_action, word_list_after_colon, TaskInstance,
};
pub use inversion::{reindent, solve_order_inversion_choice, InversionKind};
pub use qa::solve_translation_qa;
pub use relatedness::{solve_relatedness, RelatednessMode};
pub use session::{Session, TraceEntry};
pub use substitution::{solve_substitution_mixture, MixtureKind};
pub use threshold::{solve_posterior_threshold, ThresholdKind};
pub use truth::solve_truth_posterior;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TaskError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Think(#[from] ThinkError),
    #[error(transparent)]
    Sum(#[from] SumError),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

impl TaskError {
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            TaskError::Backend(_) | TaskError::Sum(SumError::Backend(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", content = "detail", rename_all = "kebab-case")]
pub enum Flag {
    /// The Think step failed and the pipeline answered by direct scoring.
    Fallback(String),
    /// The winning score was shared; the lowest index was taken.
    Tie,
    LowConfidence,
    Warning(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScore {
    pub label: String,
    pub score: f64,
}

/// What a solver decides, before the trace is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub chosen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_list: Option<Vec<String>>,
    pub per_choice: Vec<ChoiceScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Outcome {
    fn pick(labels: &[String], scores: &[f64]) -> Result<Self, TaskError> {
        let i = argmax(scores)
            .ok_or_else(|| TaskError::InvalidInstance("no scores to choose from".into()))?;
        let tie = scores
            .iter()
            .enumerate()
            .any(|(j, &s)| j != i && s == scores[i]);
        Ok(Self {
            chosen: labels[i].clone(),
            chosen_index: Some(i),
            chosen_list: None,
            per_choice: scored(labels, scores),
            flags: if tie { vec![Flag::Tie] } else { Vec::new() },
            details: Value::Null,
        })
    }

    fn flag(mut self, flag: Flag) -> Self {
        self.flags.push(flag);
        self
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn is_fallback(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::Fallback(_)))
    }
}

fn scored(labels: &[String], scores: &[f64]) -> Vec<ChoiceScore> {
    labels
        .iter()
        .zip(scores)
        .map(|(l, &s)| ChoiceScore {
            label: l.clone(),
            score: s,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub pipeline: PipelineKind,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{error}")]
pub struct PipelineError {
    pub error: TaskError,
    /// Calls made before the failure.
    pub trace: Vec<TraceEntry>,
}

/// Scores `" {choice}"` after `prompt` for each choice, as a posterior over choices.
pub(crate) fn direct_outcome(
    s: &Session,
    prompt: &str,
    choices: &[String],
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    if choices.is_empty() {
        return Err(TaskError::InvalidInstance(
            "direct scoring needs choices".into(),
        ));
    }
    let queries: Vec<(String, String)> = choices
        .iter()
        .map(|c| (prompt.to_string(), format!(" {}", c.trim())))
        .collect();
    let scores: Vec<f64> = s
        .score_batch(&queries)?
        .iter()
        .map(|q| q.score(cfg.length_normalization))
        .collect();
    let post = posterior_normalize(&scores, choices)?;
    Outcome::pick(choices, &post.probabilities)
}

/// Generation where an empty output counts as a failed Think step, not a backend error.
pub(crate) fn generate_text(
    s: &Session,
    prompt: &str,
    params: &GenerationParams,
) -> Result<String, TaskError> {
    match s.generate(prompt, params) {
        Ok(text) => Ok(text),
        Err(BackendError::EmptyGeneration(_)) => Ok(String::new()),
        Err(e) => Err(e.into()),
    }
}

/// Direct scoring of the instance's own choices, flagged as a fallback.
pub(crate) fn fallback_direct(
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
    reason: impl Into<String>,
) -> Result<Outcome, TaskError> {
    let reason = reason.into();
    tracing::warn!(%reason, "Think step failed; falling back to direct scoring");
    Ok(direct_outcome(s, inst.input.trim(), &inst.choices, cfg)?.flag(Flag::Fallback(reason)))
}

/// Maps a pipeline's answer onto the instance's choice list when one exists.
fn align_to_choices(mut out: Outcome, inst: &TaskInstance) -> Outcome {
    if inst.choices.is_empty() {
        return out;
    }
    match inst.choice_index(&out.chosen) {
        Some(i) => {
            out.chosen = inst.choices[i].clone();
            out.chosen_index = Some(i);
        }
        None => {
            out.chosen_index = None;
            out.flags.push(Flag::Warning(format!(
                "answer {:?} is not among the choices",
                out.chosen
            )));
        }
    }
    out
}

fn solve(
    kind: PipelineKind,
    s: &Session,
    inst: &TaskInstance,
    cfg: &TaskConfig,
) -> Result<Outcome, TaskError> {
    use PipelineKind as P;
    let out = match kind {
        P::OddOneOut => solve_relatedness(s, inst, cfg, RelatednessMode::ListOfWords)?,
        P::OddOneOutMinorityVote => solve_relatedness(s, inst, cfg, RelatednessMode::MinorityVote)?,
        P::OddOneOutLvm => solve_relatedness(s, inst, cfg, RelatednessMode::Lvm)?,
        P::PhraseRelatedness => solve_relatedness(s, inst, cfg, RelatednessMode::Phrase)?,
        P::Codenames => solve_relatedness(s, inst, cfg, RelatednessMode::TopK)?,
        P::InventedWords => solve_substitution_mixture(s, inst, cfg, MixtureKind::InventedWords)?,
        P::NovelConcepts => solve_substitution_mixture(s, inst, cfg, MixtureKind::NovelConcepts)?,
        P::Sports => solve_posterior_threshold(s, inst, cfg, ThresholdKind::Sports)?,
        P::KnownUnknowns => solve_posterior_threshold(s, inst, cfg, ThresholdKind::KnownUnknowns)?,
        P::Misconceptions => solve_truth_posterior(s, inst, cfg, cfg.misconception_translations)?,
        P::EmojiMovie => solve_order_inversion_choice(s, inst, cfg, InversionKind::EmojiMovie)?,
        P::EmojiMovieTranslated => {
            solve_order_inversion_choice(s, inst, cfg, InversionKind::EmojiMovieTranslated)?
        }
        P::LanguageId => solve_order_inversion_choice(s, inst, cfg, InversionKind::LanguageId)?,
        P::CodeLine => solve_order_inversion_choice(s, inst, cfg, InversionKind::CodeLine)?,
        P::LogicalDeduction => solve_logical_deduction(s, inst, cfg)?,
        P::TranslationQa => solve_translation_qa(s, inst, cfg)?,
        P::Direct => solve_baseline(s, inst, cfg, BaselineKind::Direct)?,
        P::AuxiliaryKnowledge => solve_baseline(s, inst, cfg, BaselineKind::AuxiliaryKnowledge)?,
        P::ChainOfThought => solve_baseline(s, inst, cfg, BaselineKind::ChainOfThought)?,
    };
    Ok(if kind.is_multiple_choice() {
        align_to_choices(out, inst)
    } else {
        out
    })
}

/// Runs one pipeline on one instance, recording every backend call.
pub fn run_pipeline(
    kind: PipelineKind,
    instance: &TaskInstance,
    config: &TaskConfig,
    model: &dyn LanguageModel,
) -> Result<PipelineResult, PipelineError> {
    let session = Session::new(model, config.parallelism);
    let result = solve(kind, &session, instance, config);
    let trace = session.into_trace();
    match result {
        Ok(outcome) => Ok(PipelineResult {
            pipeline: kind,
            outcome,
            trace,
        }),
        Err(error) => Err(PipelineError { error, trace }),
    }
}
