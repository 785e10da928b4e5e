//! Marginalizing candidate statements over position assignments.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::aggregate::{log_sum_exp, posterior_normalize, PosteriorVector};
use super::SumError;
use crate::backend::LanguageModel;
use crate::think::{
    inequality_prompt, Comparison, ConstraintSet, Operand, Relation, INEQUALITY_FALSE,
    INEQUALITY_TRUE,
};

pub const MAX_OBJECTS: usize = 8;
/// Posterior gap between the top two candidates below which a result is flagged.
pub const LOW_CONFIDENCE_GAP: f64 = 0.1;

/// Positions (1-based) of each object, in object-name order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub positions: Vec<usize>,
}

impl Assignment {
    pub fn is_permutation(&self) -> bool {
        let n = self.positions.len();
        let mut seen = vec![false; n + 1];
        for &p in &self.positions {
            if p == 0 || p > n || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }
}

/// Lexicographic stream over {1..N}^N, or over the permutations of 1..N.
#[derive(Debug, Clone)]
pub struct AssignmentIter {
    current: Option<Vec<usize>>,
    n: usize,
    permutations_only: bool,
}

impl Iterator for AssignmentIter {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let advanced = if self.permutations_only {
            next_permutation(&mut next)
        } else {
            next_tuple(&mut next, self.n)
        };
        self.current = advanced.then_some(next);
        Some(Assignment { positions: out })
    }
}

fn next_tuple(v: &mut [usize], n: usize) -> bool {
    for i in (0..v.len()).rev() {
        if v[i] < n {
            v[i] += 1;
            return true;
        }
        v[i] = 1;
    }
    false
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn enumerate_assignments(
    n: usize,
    permutations_only: bool,
) -> Result<AssignmentIter, SumError> {
    if !(2..=MAX_OBJECTS).contains(&n) {
        return Err(SumError::OutOfRange(format!(
            "object count {n} outside 2..={MAX_OBJECTS}"
        )));
    }
    let start = if permutations_only {
        (1..=n).collect()
    } else {
        vec![1; n]
    };
    Ok(AssignmentIter {
        current: Some(start),
        n,
        permutations_only,
    })
}

pub trait ComparisonEvaluator: Send + Sync {
    /// Probability that `left relation right` holds.
    fn probability(&self, left: i64, relation: Relation, right: i64) -> Result<f64, SumError>;
}

/// Constant probabilities for true and false comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalEvaluator {
    pub p_true: f64,
    pub p_false: f64,
}

impl Default for ExternalEvaluator {
    fn default() -> Self {
        Self {
            p_true: 0.99,
            p_false: 0.01,
        }
    }
}

impl ComparisonEvaluator for ExternalEvaluator {
    fn probability(&self, left: i64, relation: Relation, right: i64) -> Result<f64, SumError> {
        Ok(if relation.holds(left, right) {
            self.p_true
        } else {
            self.p_false
        })
    }
}

/// Asks the model "True or false: x<y? The answer is:" and normalizes over true/false.
/// Results are memoized per comparison string.
pub struct BackendEvaluator<M> {
    model: M,
    memo: Mutex<HashMap<String, f64>>,
}

impl<M: LanguageModel> BackendEvaluator<M> {
    pub fn new(model: M) -> Self {
        Self {
            model,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl<M: LanguageModel> ComparisonEvaluator for BackendEvaluator<M> {
    fn probability(&self, left: i64, relation: Relation, right: i64) -> Result<f64, SumError> {
        let text = format!("{left}{}{right}", relation.symbol());
        if let Some(&p) = self.memo.lock().unwrap().get(&text) {
            return Ok(p);
        }
        let prompt = inequality_prompt(&text);
        let t = self
            .model
            .score_continuation(&prompt, INEQUALITY_TRUE)?
            .log_likelihood;
        let f = self
            .model
            .score_continuation(&prompt, INEQUALITY_FALSE)?
            .log_likelihood;
        let post = posterior_normalize(&[t, f], &["true".into(), "false".into()])?;
        let p = post.probabilities[0];
        self.memo.lock().unwrap().insert(text, p);
        Ok(p)
    }
}

/// Replaces object names with their assigned positions.
pub fn substitute(
    c: &Comparison,
    set: &ConstraintSet,
    b: &Assignment,
) -> Result<Comparison, SumError> {
    let sub = |o: &Operand| -> Result<Operand, SumError> {
        match o {
            Operand::Position(p) => Ok(Operand::Position(*p)),
            Operand::Object(name) => set
                .index_of(name)
                .map(|i| Operand::Position(b.positions[i] as i64))
                .ok_or_else(|| SumError::UnknownLabel(name.clone())),
        }
    };
    Ok(Comparison::new(sub(&c.left)?, c.relation, sub(&c.right)?))
}

/// Probability of a fully numeric comparison.
pub fn evaluate_comparison(
    c: &Comparison,
    evaluator: &dyn ComparisonEvaluator,
) -> Result<f64, SumError> {
    match (&c.left, &c.right) {
        (Operand::Position(l), Operand::Position(r)) => evaluator.probability(*l, c.relation, *r),
        _ => Err(SumError::NonNumeric(c.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeductionOptions {
    pub permutations_only: bool,
    /// Also sum over a uniform binary variable that flips every inequality.
    pub reversal: bool,
}

impl Default for DeductionOptions {
    fn default() -> Self {
        Self {
            permutations_only: true,
            reversal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeductionResult {
    pub posterior: PosteriorVector,
    /// Unnormalized log mass per candidate.
    pub log_masses: Vec<f64>,
    pub low_confidence: bool,
    pub warnings: Vec<String>,
}

fn flip(c: &Comparison) -> Comparison {
    Comparison::new(c.left.clone(), c.relation.reversed(), c.right.clone())
}

fn ln_prob(
    c: &Comparison,
    set: &ConstraintSet,
    b: &Assignment,
    ev: &dyn ComparisonEvaluator,
) -> Result<f64, SumError> {
    let p = evaluate_comparison(&substitute(c, set, b)?, ev)?;
    Ok(if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
}

/// p(candidate | T) ∝ Σ_b Π_t p(T_t⟨b⟩) · p(candidate⟨b⟩), normalized over candidates.
pub fn deduction_candidate_posterior(
    constraints: &ConstraintSet,
    candidates: &[Comparison],
    options: DeductionOptions,
    evaluator: &dyn ComparisonEvaluator,
) -> Result<DeductionResult, SumError> {
    if candidates.is_empty() {
        return Err(SumError::EmptyInput);
    }
    for c in candidates {
        for name in c.objects() {
            if constraints.index_of(name).is_none() {
                return Err(SumError::UnknownLabel(name.to_string()));
            }
        }
    }
    let mut warnings = Vec::new();
    if constraints.constraints.is_empty() {
        warnings.push("empty constraint set; scoring candidates alone".to_string());
        tracing::warn!("empty constraint set; scoring candidates alone");
    }
    let orientations: &[bool] = if options.reversal {
        &[false, true]
    } else {
        &[false]
    };

    let mut per_orientation: Vec<Vec<Vec<f64>>> = vec![Vec::new(); orientations.len()];
    for b in enumerate_assignments(constraints.n(), options.permutations_only)? {
        for (o, &reversed) in orientations.iter().enumerate() {
            let mut base = 0.0;
            for t in &constraints.constraints {
                let t = if reversed { flip(t) } else { t.clone() };
                base += ln_prob(&t, constraints, &b, evaluator)?;
            }
            let mut row = Vec::with_capacity(candidates.len());
            for cand in candidates {
                let cand = if reversed { flip(cand) } else { cand.clone() };
                row.push(base + ln_prob(&cand, constraints, &b, evaluator)?);
            }
            per_orientation[o].push(row);
        }
    }

    let weight = -(orientations.len() as f64).ln();
    let log_masses: Vec<f64> = (0..candidates.len())
        .map(|k| {
            let per: Vec<f64> = per_orientation
                .iter()
                .map(|rows| log_sum_exp(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()) + weight)
                .collect();
            log_sum_exp(&per)
        })
        .collect();
    let labels: Vec<String> = candidates.iter().map(ToString::to_string).collect();
    let posterior = posterior_normalize(&log_masses, &labels)?;
    let low_confidence = posterior.len() > 1 && posterior.top_gap() < LOW_CONFIDENCE_GAP;
    Ok(DeductionResult {
        posterior,
        log_masses,
        low_confidence,
        warnings,
    })
}
