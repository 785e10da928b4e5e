//! Two-class latent model P(i,f) = Σ_c P(c) P(i|c) P(f|c), fit by EM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aggregate::log_sum_exp;
use super::matrix::ScoreMatrix;
use super::SumError;

pub const EM_ITERATIONS: usize = 200;
const CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentClassModel {
    pub items: Vec<String>,
    pub facts: Vec<String>,
    pub class_prior: [f64; CLASSES],
    /// Row i holds P(i|c) for each class.
    pub item_given_class: Vec<[f64; CLASSES]>,
    /// Row f holds P(f|c) for each class.
    pub fact_given_class: Vec<[f64; CLASSES]>,
    /// Σ_{i,f} P(i,f) ln P_model(i,f) after each iteration.
    pub log_likelihood_history: Vec<f64>,
    /// Σ_{i,f} P(i,f) Σ_c Q(c|i,f) ln[P(c)P(i|c)P(f|c)], with Q from the E-step and
    /// parameters from the following M-step of the same iteration.
    pub expected_complete_history: Vec<f64>,
    /// The EM lower bound: `expected_complete_history` plus the entropy of Q.
    /// Non-decreasing across iterations.
    pub lower_bound_history: Vec<f64>,
    /// Largest deviation from 1 of any maintained distribution over the run.
    pub max_normalization_error: f64,
    /// Set when the input carries no signal (all entries equal).
    pub degenerate: bool,
}

impl LatentClassModel {
    fn joint(&self, i: usize, f: usize) -> [f64; CLASSES] {
        let mut q = [0.0; CLASSES];
        for (c, qc) in q.iter_mut().enumerate() {
            *qc = self.class_prior[c] * self.item_given_class[i][c] * self.fact_given_class[f][c];
        }
        q
    }

    /// Q(c|i,f) under the current parameters.
    pub fn posterior(&self, i: usize, f: usize) -> [f64; CLASSES] {
        normalize_or_uniform(self.joint(i, f))
    }

    /// Class maximizing P(c) P(i|c); the lower class wins ties.
    pub fn item_class(&self, i: usize) -> usize {
        let a = self.class_prior[0] * self.item_given_class[i][0];
        let b = self.class_prior[1] * self.item_given_class[i][1];
        usize::from(b > a)
    }

    pub fn item_partition(&self) -> Vec<usize> {
        (0..self.items.len()).map(|i| self.item_class(i)).collect()
    }

    pub fn item_index(&self, label: &str) -> Option<usize> {
        self.items.iter().position(|x| x == label)
    }
}

fn normalize_or_uniform<const N: usize>(mut v: [f64; N]) -> [f64; N] {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v = [1.0 / N as f64; N];
    }
    v
}

fn normalize_columns(table: &mut [[f64; CLASSES]]) {
    for c in 0..CLASSES {
        let s: f64 = table.iter().map(|row| row[c]).sum();
        if s > 0.0 {
            table.iter_mut().for_each(|row| row[c] /= s);
        } else {
            let u = 1.0 / table.len() as f64;
            table.iter_mut().for_each(|row| row[c] = u);
        }
    }
}

fn dirichlet_columns(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; CLASSES]> {
    let mut table = vec![[0.0; CLASSES]; n];
    for c in 0..CLASSES {
        for row in table.iter_mut() {
            // Exp(1) draws normalized give a uniform sample from the simplex.
            let u: f64 = rng.gen::<f64>();
            row[c] = -(1.0 - u).ln();
        }
    }
    normalize_columns(&mut table);
    table
}

fn column_error(table: &[[f64; CLASSES]]) -> f64 {
    (0..CLASSES)
        .map(|c| (table.iter().map(|r| r[c]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn safe_ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Fits the model to `joint` (rows = items, columns = facts, log-likelihood entries).
/// Entries are exponentiated and normalized to a joint distribution first.
pub fn em_fit(
    joint: &ScoreMatrix,
    iterations: usize,
    seed: u64,
) -> Result<LatentClassModel, SumError> {
    let (ni, nf) = (joint.n_rows(), joint.n_cols());
    if ni < 2 || nf < 2 {
        return Err(SumError::Degenerate(format!(
            "EM needs at least 2x2, got {ni}x{nf}"
        )));
    }
    let flat: Vec<f64> = joint.values().iter().flatten().copied().collect();
    let z = log_sum_exp(&flat);
    let p: Vec<Vec<f64>> = joint
        .values()
        .iter()
        .map(|row| row.iter().map(|x| (x - z).exp()).collect())
        .collect();
    let degenerate = flat.iter().all(|&x| x == flat[0]);
    if degenerate {
        tracing::warn!("EM input matrix is constant; clusters are meaningless");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LatentClassModel {
        items: joint.rows().to_vec(),
        facts: joint.cols().to_vec(),
        class_prior: [1.0 / CLASSES as f64; CLASSES],
        item_given_class: dirichlet_columns(&mut rng, ni),
        fact_given_class: dirichlet_columns(&mut rng, nf),
        log_likelihood_history: Vec::with_capacity(iterations),
        expected_complete_history: Vec::with_capacity(iterations),
        lower_bound_history: Vec::with_capacity(iterations),
        max_normalization_error: 0.0,
        degenerate,
    };

    let mut q = vec![vec![[0.0; CLASSES]; nf]; ni];
    for _ in 0..iterations {
        // E-step
        for (i, row) in q.iter_mut().enumerate() {
            for (f, cell) in row.iter_mut().enumerate() {
                *cell = model.posterior(i, f);
                model.max_normalization_error = model
                    .max_normalization_error
                    .max((cell.iter().sum::<f64>() - 1.0).abs());
            }
        }
        // M-step
        let mut items = vec![[0.0; CLASSES]; ni];
        let mut facts = vec![[0.0; CLASSES]; nf];
        let mut prior = [0.0; CLASSES];
        for i in 0..ni {
            for f in 0..nf {
                for c in 0..CLASSES {
                    let w = p[i][f] * q[i][f][c];
                    items[i][c] += w;
                    facts[f][c] += w;
                    prior[c] += w;
                }
            }
        }
        normalize_columns(&mut items);
        normalize_columns(&mut facts);
        model.item_given_class = items;
        model.fact_given_class = facts;
        model.class_prior = normalize_or_uniform(prior);
        model.max_normalization_error = model
            .max_normalization_error
            .max(column_error(&model.item_given_class))
            .max(column_error(&model.fact_given_class))
            .max((model.class_prior.iter().sum::<f64>() - 1.0).abs());

        let mut ll = 0.0;
        let mut ecll = 0.0;
        let mut entropy = 0.0;
        for i in 0..ni {
            for f in 0..nf {
                if p[i][f] == 0.0 {
                    continue;
                }
                let j = model.joint(i, f);
                ll += p[i][f] * safe_ln(j.iter().sum());
                for c in 0..CLASSES {
                    if q[i][f][c] > 0.0 {
                        ecll += p[i][f] * q[i][f][c] * safe_ln(j[c]);
                        entropy -= p[i][f] * q[i][f][c] * q[i][f][c].ln();
                    }
                }
            }
        }
        model.log_likelihood_history.push(ll);
        model.expected_complete_history.push(ecll);
        model.lower_bound_history.push(ecll + entropy);
    }
    Ok(model)
}

/// ln S_i with S_i = Σ_{c, c'≠c} P(i|c)P(c) Π_{m∈others} P(m|c')P(c').
pub fn lvm_odd_log_score(model: &LatentClassModel, item: usize, others: &[usize]) -> f64 {
    let mut terms = Vec::with_capacity(CLASSES * (CLASSES - 1));
    for c in 0..CLASSES {
        for c2 in (0..CLASSES).filter(|&c2| c2 != c) {
            let mut t = safe_ln(model.item_given_class[item][c]) + safe_ln(model.class_prior[c]);
            for &m in others {
                t += safe_ln(model.item_given_class[m][c2]) + safe_ln(model.class_prior[c2]);
            }
            terms.push(t);
        }
    }
    log_sum_exp(&terms)
}

/// S_i for `item` against `others` (labels). Together they must cover the model's items.
pub fn lvm_odd_score(
    model: &LatentClassModel,
    item: &str,
    others: &[String],
) -> Result<f64, SumError> {
    let i = model
        .item_index(item)
        .ok_or_else(|| SumError::UnknownLabel(item.to_string()))?;
    let mut idx = Vec::with_capacity(others.len());
    for o in others {
        let m = model
            .item_index(o)
            .ok_or_else(|| SumError::UnknownLabel(o.clone()))?;
        if m == i || idx.contains(&m) {
            return Err(SumError::Degenerate(format!("item {o:?} listed twice")));
        }
        idx.push(m);
    }
    if idx.len() + 1 != model.items.len() {
        return Err(SumError::Degenerate(
            "item and others must cover every row of the model".into(),
        ));
    }
    Ok(lvm_odd_log_score(model, i, &idx).exp())
}

/// ln S_i for every item against all the rest.
pub fn lvm_odd_log_scores(model: &LatentClassModel) -> Vec<f64> {
    let n = model.items.len();
    (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&m| m != i).collect();
            lvm_odd_log_score(model, i, &others)
        })
        .collect()
}
