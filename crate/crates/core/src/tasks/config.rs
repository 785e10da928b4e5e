//! Pipeline selection and hyperparameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{GenerationParams, LengthNormalization};
use crate::sum::{DeductionOptions, ExternalEvaluator};
use crate::think::CotTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    OddOneOut,
    OddOneOutMinorityVote,
    OddOneOutLvm,
    PhraseRelatedness,
    Codenames,
    InventedWords,
    NovelConcepts,
    Sports,
    KnownUnknowns,
    Misconceptions,
    EmojiMovie,
    EmojiMovieTranslated,
    LanguageId,
    CodeLine,
    LogicalDeduction,
    TranslationQa,
    Direct,
    AuxiliaryKnowledge,
    ChainOfThought,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 19] = [
        PipelineKind::OddOneOut,
        PipelineKind::OddOneOutMinorityVote,
        PipelineKind::OddOneOutLvm,
        PipelineKind::PhraseRelatedness,
        PipelineKind::Codenames,
        PipelineKind::InventedWords,
        PipelineKind::NovelConcepts,
        PipelineKind::Sports,
        PipelineKind::KnownUnknowns,
        PipelineKind::Misconceptions,
        PipelineKind::EmojiMovie,
        PipelineKind::EmojiMovieTranslated,
        PipelineKind::LanguageId,
        PipelineKind::CodeLine,
        PipelineKind::LogicalDeduction,
        PipelineKind::TranslationQa,
        PipelineKind::Direct,
        PipelineKind::AuxiliaryKnowledge,
        PipelineKind::ChainOfThought,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::OddOneOut => "odd-one-out",
            PipelineKind::OddOneOutMinorityVote => "odd-one-out-minority-vote",
            PipelineKind::OddOneOutLvm => "odd-one-out-lvm",
            PipelineKind::PhraseRelatedness => "phrase-relatedness",
            PipelineKind::Codenames => "codenames",
            PipelineKind::InventedWords => "invented-words",
            PipelineKind::NovelConcepts => "novel-concepts",
            PipelineKind::Sports => "sports",
            PipelineKind::KnownUnknowns => "known-unknowns",
            PipelineKind::Misconceptions => "misconceptions",
            PipelineKind::EmojiMovie => "emoji-movie",
            PipelineKind::EmojiMovieTranslated => "emoji-movie-translated",
            PipelineKind::LanguageId => "language-id",
            PipelineKind::CodeLine => "code-line",
            PipelineKind::LogicalDeduction => "logical-deduction",
            PipelineKind::TranslationQa => "translation-qa",
            PipelineKind::Direct => "direct",
            PipelineKind::AuxiliaryKnowledge => "auxiliary-knowledge",
            PipelineKind::ChainOfThought => "chain-of-thought",
        }
    }

    /// Whether the pipeline picks one of the instance's choices.
    pub fn is_multiple_choice(self) -> bool {
        !matches!(self, PipelineKind::Codenames | PipelineKind::TranslationQa)
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = PipelineKind::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown pipeline {s:?}; expected one of {}",
                    known.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum EvaluatorChoice {
    External { p_true: f64, p_false: f64 },
    Backend,
}

impl Default for EvaluatorChoice {
    fn default() -> Self {
        let e = ExternalEvaluator::default();
        EvaluatorChoice::External {
            p_true: e.p_true,
            p_false: e.p_false,
        }
    }
}

/// Hyperparameters. Defaults follow the published settings where they exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Example and list generation (max_tokens 100, greedy).
    pub example_params: GenerationParams,
    /// Fact and difference generation (max_tokens 1000, greedy).
    pub fact_params: GenerationParams,
    /// Sports example generation (temperature 0.5).
    pub sports_params: GenerationParams,
    /// Language translation (temperature 0.5).
    pub translation_params: GenerationParams,
    /// Problem-to-constraints translation.
    pub formal_translation_params: GenerationParams,
    /// Answer generation and chain-of-thought rationales.
    pub answer_params: GenerationParams,
    /// Examples kept per nonce word.
    pub invented_examples: usize,
    /// Alternatives generated for sports and known-unknowns.
    pub alternatives: usize,
    /// Generated differences for fact-based odd-one-out and auxiliary knowledge.
    pub differences: usize,
    pub sports_threshold: f64,
    /// Known-unknowns margin; `None` means 1 / alternatives.
    pub known_margin: Option<f64>,
    pub deduction: DeductionOptions,
    pub evaluator: EvaluatorChoice,
    /// Sampled translations per statement for misconceptions (0 scores the originals).
    pub misconception_translations: usize,
    /// Language of misconception statements.
    pub source_language: String,
    /// Language of translation-QA passages and answers.
    pub qa_language: String,
    pub working_language: String,
    pub indent_widths: Vec<usize>,
    pub em_iterations: usize,
    pub length_normalization: LengthNormalization,
    pub cot_task: Option<CotTask>,
    pub seed: u64,
    pub parallelism: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        let stop = |p: GenerationParams| p.with_stop("\n\n");
        Self {
            example_params: stop(GenerationParams::greedy(100)),
            fact_params: stop(GenerationParams::greedy(1000)),
            sports_params: stop(GenerationParams::greedy(100).with_temperature(0.5)),
            translation_params: GenerationParams::greedy(100)
                .with_temperature(0.5)
                .with_stop("\n"),
            formal_translation_params: stop(GenerationParams::greedy(256)),
            answer_params: stop(GenerationParams::greedy(100)),
            invented_examples: 2,
            alternatives: 4,
            differences: 5,
            sports_threshold: 0.01,
            known_margin: None,
            deduction: DeductionOptions::default(),
            evaluator: EvaluatorChoice::default(),
            misconception_translations: 0,
            source_language: "Russian".to_string(),
            qa_language: "Persian".to_string(),
            working_language: "English".to_string(),
            indent_widths: (1..=6).collect(),
            em_iterations: crate::sum::EM_ITERATIONS,
            length_normalization: LengthNormalization::Total,
            cot_task: None,
            seed: 0,
            parallelism: crate::backend::DEFAULT_PARALLELISM,
        }
    }
}

impl TaskConfig {
    pub fn known_margin(&self) -> f64 {
        self.known_margin
            .unwrap_or(1.0 / self.alternatives.max(1) as f64)
    }

    /// Applies the run seed to a generation setting that has none.
    pub fn seeded(&self, params: &GenerationParams) -> GenerationParams {
        let mut p = params.clone();
        if p.seed.is_none() {
            p.seed = Some(self.seed);
        }
        p
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("example_params", &self.example_params),
            ("fact_params", &self.fact_params),
            ("sports_params", &self.sports_params),
            ("translation_params", &self.translation_params),
            ("formal_translation_params", &self.formal_translation_params),
            ("answer_params", &self.answer_params),
        ] {
            p.validate().map_err(|e| format!("{name}: {e}"))?;
        }
        if self.invented_examples == 0 || self.alternatives == 0 || self.differences == 0 {
            return Err("example, alternative and difference counts must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.sports_threshold) {
            return Err("sports_threshold must be a probability".into());
        }
        if let EvaluatorChoice::External { p_true, p_false } = self.evaluator {
            if !(0.0..=1.0).contains(&p_true) || !(0.0..=1.0).contains(&p_false) {
                return Err("evaluator probabilities must lie in [0, 1]".into());
            }
        }
        if self.indent_widths.is_empty() || self.indent_widths.contains(&0) {
            return Err("indent_widths must be non-empty and positive".into());
        }
        if self.em_iterations == 0 {
            return Err("em_iterations must be at least 1".into());
        }
        Ok(())
    }
}
