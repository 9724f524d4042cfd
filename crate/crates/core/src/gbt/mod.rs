//! Multiclass gradient-boosted regression trees with a softmax objective.
//!
//! Each round fits one tree per class to the gradient and hessian of the
//! cross-entropy loss at the current scores, using exact greedy split search
//! and Newton leaf weights `-G/H` scaled by the learning rate. There is no
//! regularisation, no minimum child weight and no subsampling.

mod eval;
mod io;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groupfeatures::Scaler;

pub use eval::{evaluate, split_holdout, EvalReport, Split};
pub use io::{load_model, load_model_checked, model_from_json, model_to_json, save_model, write_confusion, write_metrics};

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Hessian floor, as in common boosting libraries.
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            max_depth: 3,
            learning_rate: 0.3,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout fraction must be in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` (or a missing value) go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        weight: f64,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x[*feature];
                    node = if v < *threshold || v.is_nan() { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Identifies the feature layout a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub version: u32,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub format_version: u32,
    pub config: GbtConfig,
    pub classes: Vec<String>,
    pub n_features: usize,
    pub feature_manifest: Option<ManifestRef>,
    pub scaler: Option<Scaler>,
    /// `trees[class][round]`.
    pub trees: Vec<Vec<Node>>,
    /// Mean training cross-entropy before training and after each round.
    pub training_loss: Vec<f64>,
}

impl GbtModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Model with no trees; predicts the uniform distribution.
    pub fn empty(classes: Vec<String>, n_features: usize, config: GbtConfig) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            trees: vec![Vec::new(); classes.len()],
            classes,
            n_features,
            feature_manifest: None,
            scaler: None,
            training_loss: Vec::new(),
        }
    }

    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.trees.iter().map(|ts| ts.iter().map(|t| t.predict(x)).sum()).collect())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.raw_scores(x)?))
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(argmax(&p))
    }
}

pub fn predict_proba(model: &GbtModel, x: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn cross_entropy(scores: &[Vec<f64>], y: &[usize]) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(z, &c)| {
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - z[c]
        })
        .sum::<f64>()
        / y.len() as f64
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    max_depth: usize,
    learning_rate: f64,
}

/// Best split of a node: `(feature, threshold, gain, left rows, right rows)`.
type Candidate = (usize, f64, f64);

impl TreeBuilder<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + self.g[r], h + self.h[r]))
    }

    fn leaf(&self, g: f64, h: f64) -> Node {
        let weight = if h > 0.0 { -g / h * self.learning_rate } else { 0.0 };
        Node::Leaf { weight }
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<Candidate> {
        let parent = g * g / h;
        let mut best: Option<Candidate> = None;
        let n_features = self.x[rows[0]].len();
        let mut order = rows.to_vec();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k];
                gl += self.g[r];
                hl += self.h[r];
                let (a, b) = (self.x[r][f], self.x[order[k + 1]][f]);
                if a == b || a.is_nan() || b.is_nan() {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl <= 0.0 || hr <= 0.0 {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if best.is_none_or(|(_, _, bg)| gain > bg) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some((f, threshold, gain));
                }
            }
        }
        best.filter(|&(_, _, gain)| gain > 0.0)
    }

    fn build(&self, rows: &[usize], depth: usize) -> Node {
        let (g, h) = self.sums(rows);
        if depth >= self.max_depth || rows.len() < 2 || h <= 0.0 {
            return self.leaf(g, h);
        }
        match self.best_split(rows, g, h) {
            None => self.leaf(g, h),
            Some((feature, threshold, _)) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| self.x[r][feature] < threshold || self.x[r][feature].is_nan());
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&left, depth + 1)),
                    right: Box::new(self.build(&right, depth + 1)),
                }
            }
        }
    }
}

/// Trains on rows `x` with class indices `y` into `classes`.
///
/// Rows are put in a canonical order first, so any permutation of the
/// training set yields the same model.
pub fn train(x: &[Vec<f64>], y: &[usize], classes: Vec<String>, config: &GbtConfig) -> Result<GbtModel> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let n_features = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != n_features) {
        return Err(Error::Dimension {
            expected: n_features,
            actual: r.len(),
        });
    }
    if let Some(&c) = y.iter().find(|&&c| c >= classes.len()) {
        return Err(Error::Training(format!("label index {c} outside {} classes", classes.len())));
    }
    let mut present: Vec<usize> = y.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Training(format!(
            "training needs at least 2 classes, found {}",
            present.len()
        )));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    let x: Vec<Vec<f64>> = order.iter().map(|&k| x[k].clone()).collect();
    let y: Vec<usize> = order.iter().map(|&k| y[k]).collect();

    let n_classes = classes.len();
    let mut model = GbtModel::empty(classes, n_features, *config);
    let mut scores = vec![vec![0.0; n_classes]; x.len()];
    model.training_loss.push(cross_entropy(&scores, &y));
    let rows: Vec<usize> = (0..x.len()).collect();
    for _ in 0..config.n_estimators {
        let probs: Vec<Vec<f64>> = scores.iter().map(|z| softmax(z)).collect();
        let mut round = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let g: Vec<f64> = probs
                .iter()
                .zip(&y)
                .map(|(p, &t)| p[c] - if t == c { 1.0 } else { 0.0 })
                .collect();
            let h: Vec<f64> = probs.iter().map(|p| (2.0 * p[c] * (1.0 - p[c])).max(MIN_HESSIAN)).collect();
            let builder = TreeBuilder {
                x: &x,
                g: &g,
                h: &h,
                max_depth: config.max_depth,
                learning_rate: config.learning_rate,
            };
            round.push(builder.build(&rows, 0));
        }
        for (c, tree) in round.into_iter().enumerate() {
            for (z, row) in scores.iter_mut().zip(&x) {
                z[c] += tree.predict(row);
            }
            model.trees[c].push(tree);
        }
        model.training_loss.push(cross_entropy(&scores, &y));
    }
    Ok(model)
}
