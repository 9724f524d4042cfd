use nalgebra::DMatrix;

use super::stats::{PoolStats, Stat};
use super::{Method, ScoreMatrix};
use crate::error::{Error, Result};
use crate::modmatrix::ModificationMatrix;

fn pooled(m: &ModificationMatrix, cells: impl Iterator<Item = (usize, usize)>) -> Vec<f64> {
    cells
        .filter(|&(i, j)| !m.is_excluded(i, j))
        .map(|(i, j)| m.values()[(i, j)])
        .collect()
}

/// Scores each entry against the history of its own locale.
pub fn temporal_scores(m: &ModificationMatrix, stat: Stat) -> Result<ScoreMatrix> {
    let (rows, cols) = m.shape();
    if cols < 2 {
        return Err(Error::Precondition(format!(
            "temporal scores need at least 2 intervals, got {cols}"
        )));
    }
    let mut scores = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let stats = PoolStats::compute(stat, &mut pooled(m, (0..cols).map(|j| (i, j))));
        for j in 0..cols {
            scores[(i, j)] = stats.score(m.values()[(i, j)]);
        }
    }
    Ok(ScoreMatrix::new(m, Method::Temporal(stat), scores, Vec::new()))
}

/// Scores each entry against all locales in the columns `j - w ..= j + w`,
/// truncated at the matrix edges.
pub fn cross_locale_scores(m: &ModificationMatrix, stat: Stat, w: usize) -> Result<ScoreMatrix> {
    let (rows, cols) = m.shape();
    let mut scores = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        let (lo, hi) = (j.saturating_sub(w), (j + w).min(cols - 1));
        let mut pool = pooled(m, (lo..=hi).flat_map(|c| (0..rows).map(move |i| (i, c))));
        let stats = PoolStats::compute(stat, &mut pool);
        for i in 0..rows {
            scores[(i, j)] = stats.score(m.values()[(i, j)]);
        }
    }
    Ok(ScoreMatrix::new(m, Method::CrossLocale { stat, w }, scores, Vec::new()))
}

/// One statistic over the whole matrix.
pub fn global_scores(m: &ModificationMatrix, stat: Stat) -> Result<ScoreMatrix> {
    let (rows, cols) = m.shape();
    if rows * cols < 2 {
        return Err(Error::Precondition(
            "global scores need at least 2 entries".into(),
        ));
    }
    let mut pool = pooled(m, (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))));
    let stats = PoolStats::compute(stat, &mut pool);
    let scores = m.values().map(|x| stats.score(x));
    Ok(ScoreMatrix::new(m, Method::Global(stat), scores, Vec::new()))
}
