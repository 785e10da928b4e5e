//! Per-example scoring and the aggregate metrics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::tasks::{PipelineKind, TaskInstance};

/// How the BLEU column is computed; written into every report summary.
pub const BLEU_NOTE: &str =
    "sentence BLEU: uniform weights over 1- to 4-gram precision, add-one smoothing for n >= 2, \
brevity penalty, lowercased tokens split on whitespace and commas, best over references";

const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    Bleu,
    ExactSet,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Bleu => "bleu",
            Metric::ExactSet => "exact-set",
        }
    }

    /// BLEU for codenames, accuracy for everything else.
    pub fn default_for(kind: Option<PipelineKind>) -> Metric {
        match kind {
            Some(PipelineKind::Codenames) => Metric::Bleu,
            _ => Metric::Accuracy,
        }
    }

    /// Overlap metrics only make sense for free-form answers.
    pub fn valid_for(self, kind: PipelineKind) -> bool {
        self == Metric::Accuracy || !kind.is_multiple_choice()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::Accuracy, Metric::Bleu, Metric::ExactSet]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}; expected accuracy, bleu or exact-set"))
    }
}

fn normalized(s: &str) -> String {
    crate::tasks::normalize_answer(s)
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Smoothed sentence-level BLEU of `candidate` against one reference.
pub fn sentence_bleu(candidate: &str, reference: &str) -> f64 {
    let cand = tokens(candidate);
    let refs = tokens(reference);
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_precision = 0.0;
    for n in 1..=MAX_ORDER {
        let c = ngram_counts(&cand, n);
        let r = ngram_counts(&refs, n);
        let matched: usize = c
            .iter()
            .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        let total = cand.len().saturating_sub(n - 1);
        let smooth = if n == 1 { 0.0 } else { 1.0 };
        let p = (matched as f64 + smooth) / (total as f64 + smooth);
        if p == 0.0 {
            return 0.0;
        }
        log_precision += p.ln() / MAX_ORDER as f64;
    }
    let (c, r) = (cand.len() as f64, refs.len() as f64);
    let brevity = if c > r { 0.0 } else { 1.0 - r / c };
    (brevity + log_precision).exp()
}

fn as_set(s: &str) -> BTreeSet<String> {
    s.split(',')
        .map(normalized)
        .filter(|w| !w.is_empty())
        .collect()
}

/// Score of one answer. Multiple-choice accuracy reads `target_scores`; the
/// other cases compare against the reference targets.
pub fn example_score(
    metric: Metric,
    instance: &TaskInstance,
    chosen: &str,
    chosen_index: Option<usize>,
) -> Result<f64, HarnessError> {
    let hit = |b: bool| if b { 1.0 } else { 0.0 };
    let targets = || -> Result<&[String], HarnessError> {
        if instance.targets.is_empty() {
            Err(HarnessError::MetricShape(format!(
                "{metric} needs reference targets"
            )))
        } else {
            Ok(&instance.targets)
        }
    };
    match metric {
        Metric::Accuracy if !instance.target_scores.is_empty() => {
            let best = instance
                .target_scores
                .iter()
                .map(|t| t.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let index = chosen_index.or_else(|| instance.choice_index(chosen));
            Ok(hit(index
                .and_then(|i| instance.target_scores.get(i))
                .is_some_and(|t| t.1 == best && best > 0.0)))
        }
        Metric::Accuracy => {
            let key = normalized(chosen);
            Ok(hit(targets()?.iter().any(|t| normalized(t) == key)))
        }
        Metric::ExactSet => {
            let set = as_set(chosen);
            Ok(hit(targets()?.iter().any(|t| as_set(t) == set)))
        }
        Metric::Bleu => Ok(targets()?
            .iter()
            .map(|t| sentence_bleu(chosen, t))
            .fold(0.0, f64::max)),
    }
}

/// Mean of per-example scores, summed in order.
pub fn compute_metric(scores: &[f64]) -> Result<f64, HarnessError> {
    if scores.is_empty() {
        return Err(HarnessError::MetricShape(
            "no completed examples to aggregate".into(),
        ));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
