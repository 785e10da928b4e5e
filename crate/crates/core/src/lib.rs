//! Two-stage inference over language-model likelihoods.
//!
//! The *Think* layer ([`think`]) turns one question into sets of parallel
//! model queries: slot substitutions, generated example and fact lists,
//! translations. The *Sum* layer ([`sum`]) aggregates the resulting scores
//! with probabilistic inference outside the model: mixtures, products,
//! posteriors, a latent-class EM model and assignment marginalization.
//! [`tasks`] composes both into pipelines for multiple-choice and generative
//! benchmarks, and [`harness`] runs them over task files.

pub mod backend;
pub mod harness;
pub mod sum;
pub mod tasks;
pub mod think;
