//! Labelled log-probability grids and minority voting.

use serde::{Deserialize, Serialize};

use super::aggregate::argmin;
use super::SumError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(
        rows: Vec<String>,
        cols: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, SumError> {
        if values.len() != rows.len() {
            return Err(SumError::LengthMismatch(values.len(), rows.len()));
        }
        for (r, row) in values.iter().enumerate() {
            if row.len() != cols.len() {
                return Err(SumError::LengthMismatch(row.len(), cols.len()));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(SumError::NonFinite(r * cols.len() + c));
            }
        }
        Ok(Self { rows, cols, values })
    }

    /// Labels `r0..` / `c0..` for quick construction.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self, SumError> {
        let n = values.len();
        let m = values.first().map_or(0, Vec::len);
        Self::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..m).map(|j| format!("c{j}")).collect(),
            values,
        )
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r][c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn transpose(&self) -> Self {
        let values = (0..self.n_cols())
            .map(|c| (0..self.n_rows()).map(|r| self.values[r][c]).collect())
            .collect();
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityVote {
    /// Winning column index.
    pub winner: usize,
    pub label: String,
    /// Votes per column.
    pub counts: Vec<usize>,
    pub tie: bool,
}

/// Rows are statements, columns items. Each row votes for its least likely item;
/// the most voted item wins, lowest index on ties.
pub fn minority_vote(matrix: &ScoreMatrix) -> Result<MinorityVote, SumError> {
    if matrix.n_rows() < 2 || matrix.n_cols() < 2 {
        return Err(SumError::Degenerate(format!(
            "minority vote needs at least 2x2, got {}x{}",
            matrix.n_rows(),
            matrix.n_cols()
        )));
    }
    let mut counts = vec![0usize; matrix.n_cols()];
    for r in 0..matrix.n_rows() {
        let j = argmin(matrix.row(r)).expect("rows are non-empty and finite");
        counts[j] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let winner = counts.iter().position(|&c| c == top).unwrap();
    let tie = counts.iter().filter(|&&c| c == top).count() > 1;
    Ok(MinorityVote {
        winner,
        label: matrix.cols[winner].clone(),
        counts,
        tie,
    })
}
