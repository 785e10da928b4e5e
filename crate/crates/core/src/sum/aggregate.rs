//! Mixtures, products, posteriors and thresholds.

use serde::{Deserialize, Serialize};

use super::SumError;

/// ln Σ exp(x), max-shifted. Returns -inf for an all -inf input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln of the arithmetic mean of exp(x).
pub fn log_mean_exp(xs: &[f64]) -> Result<f64, SumError> {
    if xs.is_empty() {
        return Err(SumError::EmptyInput);
    }
    Ok(log_sum_exp(xs) - (xs.len() as f64).ln())
}

fn check_no_nan(xs: &[f64]) -> Result<(), SumError> {
    match xs.iter().position(|x| x.is_nan() || *x == f64::INFINITY) {
        Some(i) => Err(SumError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Mean of exp(log_probs): the probability under a uniform mixture of the components.
pub fn mixture_aggregate(log_probs: &[f64]) -> Result<f64, SumError> {
    if log_probs.is_empty() {
        return Err(SumError::EmptyInput);
    }
    check_no_nan(log_probs)?;
    let m = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let mean = log_probs.iter().map(|x| (x - m).exp()).sum::<f64>() / log_probs.len() as f64;
    Ok(m.exp() * mean)
}

/// Log of the product of the component probabilities.
pub fn product_aggregate(log_probs: &[f64]) -> Result<f64, SumError> {
    if log_probs.is_empty() {
        return Err(SumError::EmptyInput);
    }
    check_no_nan(log_probs)?;
    Ok(log_probs.iter().sum())
}

/// Index of the largest value; the lowest index wins ties. NaN never wins.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        if best.map_or(true, |b| x > xs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Index of the smallest value; the lowest index wins ties. NaN never wins.
pub fn argmin(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        if best.map_or(true, |b| x < xs[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorVector {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl PosteriorVector {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.probabilities[i])
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probabilities).unwrap_or(0)
    }

    /// True when another label shares the maximal probability exactly.
    pub fn is_tie(&self) -> bool {
        let best = self.argmax();
        self.probabilities
            .iter()
            .enumerate()
            .any(|(i, &p)| i != best && p == self.probabilities[best])
    }

    /// Difference between the best and second-best probabilities (1 for a single label).
    pub fn top_gap(&self) -> f64 {
        let best = self.argmax();
        let runner = self
            .probabilities
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, &p)| p)
            .fold(f64::NEG_INFINITY, f64::max);
        if runner == f64::NEG_INFINITY {
            1.0
        } else {
            self.probabilities[best] - runner
        }
    }
}

/// Softmax over raw log-probabilities.
pub fn posterior_normalize(
    log_probs: &[f64],
    labels: &[String],
) -> Result<PosteriorVector, SumError> {
    if log_probs.len() != labels.len() {
        return Err(SumError::LengthMismatch(log_probs.len(), labels.len()));
    }
    if log_probs.is_empty() {
        return Err(SumError::EmptyInput);
    }
    check_no_nan(log_probs)?;
    let z = log_sum_exp(log_probs);
    if z == f64::NEG_INFINITY {
        return Err(SumError::Degenerate(
            "every candidate has zero probability".into(),
        ));
    }
    Ok(PosteriorVector {
        labels: labels.to_vec(),
        probabilities: log_probs.iter().map(|x| (x - z).exp()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Reject when p(target) < threshold.
    BelowRejects,
    /// Accept when p(target) exceeds the best other label by at least threshold.
    Margin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecision {
    pub accepted: bool,
    pub target_probability: f64,
    /// p(target) minus the best other probability.
    pub margin: f64,
}

pub fn threshold_decide(
    posterior: &PosteriorVector,
    target: &str,
    threshold: f64,
    mode: ThresholdMode,
) -> Result<ThresholdDecision, SumError> {
    let t = posterior
        .index_of(target)
        .ok_or_else(|| SumError::UnknownLabel(target.to_string()))?;
    let p = posterior.probabilities[t];
    let best_other = posterior
        .probabilities
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != t)
        .map(|(_, &q)| q)
        .fold(0.0, f64::max);
    let margin = p - best_other;
    let accepted = match mode {
        ThresholdMode::BelowRejects => p >= threshold,
        ThresholdMode::Margin => margin >= threshold,
    };
    Ok(ThresholdDecision {
        accepted,
        target_probability: p,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn mixture_examples() {
        let m = mixture_aggregate(&[0.2f64.ln(), 0.4f64.ln()]).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        let p = 0.37f64;
        assert_eq!(mixture_aggregate(&vec![p.ln(); 25]).unwrap(), p.ln().exp());
        assert_eq!(mixture_aggregate(&[]), Err(SumError::EmptyInput));
        assert_eq!(mixture_aggregate(&[f64::NEG_INFINITY]).unwrap(), 0.0);
    }

    #[test]
    fn mixture_survives_underflow() {
        let m = mixture_aggregate(&[-800.0, -800.0]).unwrap();
        assert_eq!(m, (-800.0f64).exp());
        let lm = log_mean_exp(&[-800.0, -801.0]).unwrap();
        let expected = -800.0 + ((1.0 + (-1.0f64).exp()) / 2.0).ln();
        assert!((lm - expected).abs() < 1e-12);
    }

    #[test]
    fn product_examples() {
        let p = product_aggregate(&[0.5f64.ln(), 0.5f64.ln()]).unwrap();
        assert!((p - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(product_aggregate(&[-3.5]).unwrap(), -3.5);
        assert!(product_aggregate(&[f64::NAN]).is_err());
    }

    #[test]
    fn posterior_examples() {
        let u = posterior_normalize(&[0.1f64.ln(); 4], &labels(4)).unwrap();
        for p in &u.probabilities {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!(u.is_tie());
        let two = posterior_normalize(&[0.9f64.ln(), 0.1f64.ln()], &labels(2)).unwrap();
        assert!((two.probabilities[0] - 0.9).abs() < 1e-15);
        assert!((two.probabilities[1] - 0.1).abs() < 1e-15);
        assert_eq!(
            posterior_normalize(&[0.0], &labels(2)),
            Err(SumError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn threshold_examples() {
        let post = PosteriorVector {
            labels: labels(3),
            probabilities: vec![0.005, 0.5, 0.495],
        };
        let d = threshold_decide(&post, "c0", 0.01, ThresholdMode::BelowRejects).unwrap();
        assert!(!d.accepted);

        let post = PosteriorVector {
            labels: labels(4),
            probabilities: vec![0.5, 0.2, 0.15, 0.15],
        };
        let d = threshold_decide(&post, "c0", 0.25, ThresholdMode::Margin).unwrap();
        assert!(d.accepted);
        assert!((d.margin - 0.3).abs() < 1e-15);

        let uniform = PosteriorVector {
            labels: labels(5),
            probabilities: vec![0.2; 5],
        };
        assert!(
            !threshold_decide(&uniform, "c0", 0.25, ThresholdMode::Margin)
                .unwrap()
                .accepted
        );
        assert!(
            threshold_decide(&uniform, "c0", 0.01, ThresholdMode::BelowRejects)
                .unwrap()
                .accepted
        );
        assert!(matches!(
            threshold_decide(&uniform, "zz", 0.01, ThresholdMode::Margin),
            Err(SumError::UnknownLabel(_))
        ));
    }

    #[test]
    fn arg_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmin(&[2.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariance(xs in proptest::collection::vec(-30.0f64..0.0, 1..10), c in -50.0f64..50.0) {
            let l = labels(xs.len());
            let a = posterior_normalize(&xs, &l).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = posterior_normalize(&shifted, &l).unwrap();
            prop_assert_eq!(a.argmax(), b.argmax());
            for (p, q) in a.probabilities.iter().zip(&b.probabilities) {
                prop_assert!((p - q).abs() < 1e-12);
            }
            prop_assert!((a.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn mixture_of_copies_is_exact(x in -700.0f64..0.0, k in 1usize..64) {
            prop_assert_eq!(mixture_aggregate(&vec![x; k]).unwrap(), x.exp());
        }

        #[test]
        fn product_permutation_invariant(mut xs in proptest::collection::vec(-20.0f64..0.0, 1..12), ys in proptest::collection::vec(-20.0f64..0.0, 1..12)) {
            let whole: Vec<f64> = xs.iter().chain(&ys).copied().collect();
            let joined = product_aggregate(&whole).unwrap();
            let split = product_aggregate(&xs).unwrap() + product_aggregate(&ys).unwrap();
            prop_assert!((joined - split).abs() < 1e-9);
            let before = product_aggregate(&xs).unwrap();
            xs.reverse();
            prop_assert!((product_aggregate(&xs).unwrap() - before).abs() < 1e-9);
        }
    }
}
