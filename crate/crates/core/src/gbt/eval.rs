use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::GbtModel;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub accuracy: f64,
    /// Per-class F1 weighted by true-class support.
    pub f1: f64,
    /// Unweighted mean F1 over classes seen in truth or predictions.
    pub f1_macro: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub holdout_size: usize,
}

impl EvalReport {
    pub fn from_predictions(classes: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Precondition("evaluation needs a non-empty holdout".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let n = classes.len();
        let mut confusion = vec![vec![0u64; n]; n];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = truth.len() as f64;
        let correct: u64 = (0..n).map(|c| confusion[c][c]).sum();
        let mut weighted = 0.0;
        let mut macro_sum = 0.0;
        let mut macro_n = 0usize;
        for c in 0..n {
            let tp = confusion[c][c] as f64;
            let support: u64 = confusion[c].iter().sum();
            let predicted_c: u64 = (0..n).map(|t| confusion[t][c]).sum();
            if support == 0 && predicted_c == 0 {
                continue;
            }
            let f1 = if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (support as f64 + predicted_c as f64)
            };
            weighted += f1 * support as f64 / total;
            macro_sum += f1;
            macro_n += 1;
        }
        Ok(Self {
            classes,
            accuracy: correct as f64 / total,
            f1: weighted,
            f1_macro: macro_sum / macro_n as f64,
            confusion,
            holdout_size: truth.len(),
        })
    }
}

pub fn evaluate(model: &GbtModel, x: &[Vec<f64>], y: &[usize]) -> Result<EvalReport> {
    let predicted = x.iter().map(|row| model.predict(row)).collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(model.classes.clone(), y, &predicted)
}

/// Row indices of a train/holdout split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
    pub stratified: bool,
}

/// Holds out `round(fraction · n)` rows.
///
/// Classes receive holdout quotas proportional to their size (largest
/// remainder, ties to the lower class index) and rows within a class are
/// drawn at random. If some class has a single member the split falls back
/// to a plain random draw.
pub fn split_holdout(labels: &[usize], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let n = labels.len();
    let size = (fraction * n as f64).round() as usize;
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (k, &c) in labels.iter().enumerate() {
        members[c].push(k);
    }
    let stratified = members.iter().all(|m| m.len() != 1);
    let mut holdout = Vec::with_capacity(size);
    if stratified {
        let exact: Vec<f64> = members.iter().map(|m| size as f64 * m.len() as f64 / n as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
        let mut left = size - quota.iter().sum::<usize>();
        let mut by_remainder: Vec<usize> = (0..n_classes).filter(|&c| !members[c].is_empty()).collect();
        by_remainder.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        for c in by_remainder {
            if left == 0 {
                break;
            }
            if quota[c] < members[c].len() {
                quota[c] += 1;
                left -= 1;
            }
        }
        for (c, m) in members.iter().enumerate() {
            let mut m = m.clone();
            m.shuffle(&mut seed::sub_rng(seed, "holdout", c as u64));
            holdout.extend_from_slice(&m[..quota[c]]);
        }
    } else {
        log::warn!("a class has a single member; holdout split is not stratified");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut seed::sub_rng(seed, "holdout", u64::MAX));
        holdout.extend_from_slice(&all[..size]);
    }
    holdout.sort_unstable();
    let mut is_holdout = vec![false; n];
    for &k in &holdout {
        is_holdout[k] = true;
    }
    let train = (0..n).filter(|&k| !is_holdout[k]).collect();
    Ok(Split {
        train,
        holdout,
        stratified,
    })
}
