//! Probabilistic aggregation over Think-stage scores.
//!
//! Inputs are natural-log probabilities. Sums of probabilities go through
//! [`log_sum_exp`]; probabilities are materialized only when normalizing.

mod aggregate;
mod deduction;
mod em;
mod matrix;

use thiserror::Error;

use crate::backend::BackendError;

pub use aggregate::{
    argmax, argmin, log_mean_exp, log_sum_exp, mixture_aggregate, posterior_normalize,
    product_aggregate, threshold_decide, PosteriorVector, ThresholdDecision, ThresholdMode,
};
pub use deduction::{
    deduction_candidate_posterior, enumerate_assignments, evaluate_comparison, substitute,
    Assignment, AssignmentIter, BackendEvaluator, ComparisonEvaluator, DeductionOptions,
    DeductionResult, ExternalEvaluator, LOW_CONFIDENCE_GAP, MAX_OBJECTS,
};
pub use em::{em_fit, lvm_odd_log_scores, lvm_odd_score, LatentClassModel, EM_ITERATIONS};
pub use matrix::{minority_vote, MinorityVote, ScoreMatrix};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SumError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("comparison {0:?} is not fully numeric")]
    NonNumeric(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
