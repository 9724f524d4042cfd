use std::collections::BTreeSet;
use std::fmt::Write as _;

use vrf_sentinel::detectors::{rank_entries, ranked_to_csv, score_matrix, scores_to_csv, Method};
use vrf_sentinel::evalharness::{average_rank, gamma_sweep, sweep_report, SweepConfig};
use vrf_sentinel::modmatrix::{csv_to_matrix, format_sig, MatrixEntryRef, ModificationMatrix};
use vrf_sentinel::render::{render_heatmap, HeatmapSource};
use vrf_sentinel::synthgen::GroundTruth;
use vrf_sentinel::{seed, Error, Result};

use super::Run;
use crate::args::{DetectArgs, EvaluateArgs};

fn is_iterative(method: Method) -> bool {
    matches!(method, Method::Nmf { .. } | Method::Rpca { .. })
}

pub fn detect(a: &DetectArgs, run: &mut Run) -> Result<()> {
    let m = csv_to_matrix(&a.matrix)?;
    let method = Method::parse(&a.method, a.window, a.k, a.lambda)?;
    let scores = score_matrix(&m, method, seed::derive(run.seed, "detector", 0))?;
    if is_iterative(method) {
        if !scores.converged() {
            log::warn!("{method} stopped at its iteration limit before converging");
        }
        run.record_convergence(scores.converged());
    }
    let id = method.id();
    scores_to_csv(&scores, run.output(format!("scores_{id}.csv"))?)?;
    let ranked = rank_entries(&scores);
    ranked_to_csv(&ranked, &scores, run.output(format!("ranked_{id}.csv"))?)?;
    let top: BTreeSet<MatrixEntryRef> = ranked.top(a.top_k).collect();
    render_heatmap(HeatmapSource::Scores(&scores), run.output(format!("scores_{id}.svg"))?, &top)?;
    Ok(())
}

fn methods(a: &EvaluateArgs) -> Result<Vec<Method>> {
    if a.method.is_empty() {
        return Ok(Method::comparison_set());
    }
    a.method.iter().map(|name| Method::parse(name, a.window, a.k, a.lambda)).collect()
}

/// Planted cells of the truth, located in `m` by locale name and interval.
fn planted_in(m: &ModificationMatrix, truth: &GroundTruth) -> Result<BTreeSet<MatrixEntryRef>> {
    let grid = truth.grid()?;
    let mut out = BTreeSet::new();
    for e in truth.planted_cells(m.change_type()) {
        let locale = &truth.locales[e.locale_index];
        let interval = grid.interval(e.interval_index);
        let i = m.locales().iter().position(|l| l == locale);
        let j = m.intervals().iter().position(|iv| *iv == interval);
        match (i, j) {
            (Some(i), Some(j)) => {
                out.insert(MatrixEntryRef::new(i, j));
            }
            _ => {
                return Err(Error::Incompatible(format!(
                    "planted cell ({locale}, {}) is not in the matrix",
                    interval.start
                )))
            }
        }
    }
    Ok(out)
}

pub fn evaluate(a: &EvaluateArgs, run: &mut Run) -> Result<()> {
    let m = csv_to_matrix(&a.matrix)?;
    let methods = methods(a)?;
    let config = SweepConfig {
        fraction: a.fraction,
        k: a.top_k,
        grid_points: a.grid_points,
        fixed_mask: a.fixed_mask,
        seed: run.seed,
    };
    let mut results = Vec::with_capacity(methods.len());
    for &method in &methods {
        let r = gamma_sweep(&m, method, &config)?;
        log::info!("{method}: AUC {}", format_sig(r.auc, 6));
        results.push(r);
    }
    sweep_report(&results, &run.out)?;

    if let Some(path) = &a.truth {
        let truth = GroundTruth::read(path)?;
        let planted = planted_in(&m, &truth)?;
        if planted.is_empty() {
            log::warn!("ground truth has no planted {} cells; planted_ranks.csv not written", m.change_type());
            return Ok(());
        }
        let mut csv = String::from("method,average_rank,entries\n");
        for &method in &methods {
            let scores = score_matrix(&m, method, config.detector_seed())?;
            if is_iterative(method) {
                run.record_convergence(scores.converged());
            }
            let rank = average_rank(&rank_entries(&scores), &planted)?;
            writeln!(csv, "{},{},{}", method.id(), format_sig(rank, 9), m.len()).expect("string write");
        }
        std::fs::write(run.output("planted_ranks.csv")?, csv)?;
    }
    Ok(())
}
