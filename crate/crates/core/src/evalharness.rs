//! Detector evaluation under planted sparse additive noise.
//!
//! A random fraction of entries gets `γ` added to its value; each detector
//! ranks the perturbed matrix and precision@k measures how many of the top
//! `k` entries are perturbed ones. Sweeping `γ` from 0 to 20× the matrix
//! mean and integrating gives a single AUC per method.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;

use crate::detectors::{rank_entries, score_matrix, Method, RankedEntries};
use crate::error::{Error, Result};
use crate::modmatrix::{format_sig, MatrixEntryRef, ModificationMatrix};
use crate::render;
use crate::seed;
use crate::vrf_io::ChangeType;

pub const DEFAULT_FRACTION: f64 = 0.01;
pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_GRID_POINTS: usize = 21;
/// The sweep's upper end as a multiple of the matrix mean.
pub const GAMMA_SPAN_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub fraction: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn set_size(&self, rows: usize, cols: usize) -> usize {
        ((self.fraction * (rows * cols) as f64).round() as usize).max(1)
    }

    /// Distinct entries chosen uniformly, sorted by `(locale, interval)`.
    pub fn perturbed_set(&self, rows: usize, cols: usize) -> Result<Vec<MatrixEntryRef>> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Precondition(format!(
                "perturbation fraction must be in (0, 1], got {}",
                self.fraction
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Precondition(format!("γ must be a finite non-negative number, got {}", self.gamma)));
        }
        let n = rows * cols;
        let amount = self.set_size(rows, cols).min(n);
        let mut rng = seed::rng(self.seed);
        let mut picked: Vec<MatrixEntryRef> = index::sample(&mut rng, n, amount)
            .into_iter()
            .map(|k| MatrixEntryRef::new(k / cols, k % cols))
            .collect();
        picked.sort();
        Ok(picked)
    }
}

/// Adds `gamma` to the listed entries of the value grid.
pub fn perturb_entries(m: &ModificationMatrix, entries: &[MatrixEntryRef], gamma: f64) -> Result<ModificationMatrix> {
    let mut values = m.values().clone();
    for e in entries {
        values[(e.locale_index, e.interval_index)] += gamma;
    }
    m.with_values(values)
}

pub fn perturb(m: &ModificationMatrix, spec: &PerturbationSpec) -> Result<ModificationMatrix> {
    let (rows, cols) = m.shape();
    perturb_entries(m, &spec.perturbed_set(rows, cols)?, spec.gamma)
}

pub fn precision_at_k(ranked: &RankedEntries, truth: &BTreeSet<MatrixEntryRef>, k: usize) -> Result<f64> {
    if k == 0 || k > ranked.len() {
        return Err(Error::Precondition(format!(
            "k = {k} must be in 1..={}",
            ranked.len()
        )));
    }
    let hits = ranked.top(k).filter(|e| truth.contains(e)).count();
    Ok(hits as f64 / k as f64)
}

/// Mean 1-based rank of the truth entries.
pub fn average_rank(ranked: &RankedEntries, truth: &BTreeSet<MatrixEntryRef>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Precondition("average rank needs at least one truth entry".into()));
    }
    let mut total = 0usize;
    let mut found = 0usize;
    for (r, (e, _)) in ranked.entries().iter().enumerate() {
        if truth.contains(e) {
            total += r + 1;
            found += 1;
        }
    }
    if found != truth.len() {
        return Err(Error::Precondition(format!(
            "{} truth entries are not in the ranking",
            truth.len() - found
        )));
    }
    Ok(total as f64 / found as f64)
}

/// `n` evenly spaced points on `[0, 20 · mean(values)]`.
pub fn gamma_grid(m: &ModificationMatrix, n: usize) -> Vec<f64> {
    let top = GAMMA_SPAN_FACTOR * m.mean_value();
    (0..n)
        .map(|g| if g + 1 == n { top } else { top * g as f64 / (n - 1) as f64 })
        .collect()
}

/// Trapezoidal integral of `ys` over `xs`, divided by the span of `xs`.
pub fn normalized_auc(xs: &[f64], ys: &[f64]) -> f64 {
    let span = xs.last().copied().unwrap_or(0.0) - xs.first().copied().unwrap_or(0.0);
    if span <= 0.0 {
        return ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    }
    let area: f64 = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum();
    area / span
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub fraction: f64,
    pub k: usize,
    pub grid_points: usize,
    /// Reuse one perturbed set for every γ instead of drawing a fresh one.
    pub fixed_mask: bool,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FRACTION,
            k: DEFAULT_TOP_K,
            grid_points: DEFAULT_GRID_POINTS,
            fixed_mask: false,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn mask_seed(&self, g: usize) -> u64 {
        let index = if self.fixed_mask { 0 } else { g as u64 };
        seed::derive(self.seed, "mask", index)
    }

    pub fn detector_seed(&self) -> u64 {
        seed::derive(self.seed, "detector", 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: String,
    pub change_type: ChangeType,
    pub gamma_grid: Vec<f64>,
    pub precision_at_k: Vec<f64>,
    pub auc: f64,
    pub k: usize,
}

pub fn gamma_sweep(m: &ModificationMatrix, method: Method, config: &SweepConfig) -> Result<SweepResult> {
    if config.grid_points < 2 {
        return Err(Error::Precondition(format!(
            "γ grid needs at least 2 points, got {}",
            config.grid_points
        )));
    }
    let (rows, cols) = m.shape();
    let grid = gamma_grid(m, config.grid_points);
    let mut precision = Vec::with_capacity(grid.len());
    for (g, &gamma) in grid.iter().enumerate() {
        let spec = PerturbationSpec {
            fraction: config.fraction,
            gamma,
            seed: config.mask_seed(g),
        };
        let mask = spec.perturbed_set(rows, cols)?;
        let perturbed = perturb_entries(m, &mask, gamma)?;
        let scores = score_matrix(&perturbed, method, config.detector_seed())?;
        let truth: BTreeSet<_> = mask.into_iter().collect();
        precision.push(precision_at_k(&rank_entries(&scores), &truth, config.k)?);
    }
    let auc = normalized_auc(&grid, &precision);
    Ok(SweepResult {
        method: method.id(),
        change_type: m.change_type(),
        gamma_grid: grid,
        precision_at_k: precision,
        auc,
        k: config.k,
    })
}

/// Writes `sweep_<change_type>.csv` and `.svg` per change type plus
/// `auc_summary.csv` (rows = change types, columns = methods) into `dir`.
pub fn sweep_report(results: &[SweepResult], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut methods: Vec<&str> = Vec::new();
    let mut by_type: BTreeMap<ChangeType, Vec<&SweepResult>> = BTreeMap::new();
    for r in results {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        by_type.entry(r.change_type).or_default().push(r);
    }

    for (ct, rs) in &by_type {
        let mut out = csv::Writer::from_path(dir.join(format!("sweep_{ct}.csv")))?;
        out.write_record(["method", "row_kind", "gamma", "value"])?;
        for r in rs {
            for (g, p) in r.gamma_grid.iter().zip(&r.precision_at_k) {
                out.write_record([r.method.as_str(), "precision", &format_sig(*g, 9), &format_sig(*p, 9)])?;
            }
        }
        for r in rs {
            out.write_record([r.method.as_str(), "auc", "", &format_sig(r.auc, 9)])?;
        }
        out.flush()?;

        let series: Vec<(String, Vec<(f64, f64)>)> = rs
            .iter()
            .map(|r| {
                (
                    format!("{} (AUC {})", r.method, format_sig(r.auc, 3)),
                    r.gamma_grid.iter().copied().zip(r.precision_at_k.iter().copied()).collect(),
                )
            })
            .collect();
        let k = rs.first().map(|r| r.k).unwrap_or(DEFAULT_TOP_K);
        let svg = render::line_plot_svg(
            &format!("{ct}: precision@{k} vs γ"),
            "γ (changes per day per 1000 voters)",
            &format!("precision@{k}"),
            &series,
            Some((0.0, 1.0)),
        );
        std::fs::write(dir.join(format!("sweep_{ct}.svg")), svg)?;
    }

    let mut summary = String::from("change_type");
    for m in &methods {
        write!(summary, ",{m}").unwrap();
    }
    summary.push('\n');
    for (ct, rs) in &by_type {
        summary.push_str(ct.as_str());
        for m in &methods {
            let cell = rs
                .iter()
                .find(|r| r.method == *m)
                .map(|r| format_sig(r.auc, 9))
                .unwrap_or_default();
            write!(summary, ",{cell}").unwrap();
        }
        summary.push('\n');
    }
    std::fs::write(dir.join("auc_summary.csv"), summary)?;
    Ok(())
}
