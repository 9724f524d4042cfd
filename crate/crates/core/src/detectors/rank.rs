use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use super::ScoreMatrix;
use crate::error::Result;
use crate::modmatrix::{format_sig, MatrixEntryRef};

/// Entries in descending score order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntries {
    entries: Vec<(MatrixEntryRef, f64)>,
}

impl RankedEntries {
    pub fn entries(&self) -> &[(MatrixEntryRef, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, k: usize) -> impl Iterator<Item = MatrixEntryRef> + '_ {
        self.entries.iter().take(k).map(|(e, _)| *e)
    }

    /// 1-based rank of every entry, indexed `[locale][interval]`.
    pub fn positions(&self, rows: usize, cols: usize) -> Vec<Vec<usize>> {
        let mut pos = vec![vec![0; cols]; rows];
        for (r, (e, _)) in self.entries.iter().enumerate() {
            pos[e.locale_index][e.interval_index] = r + 1;
        }
        pos
    }
}

/// Sorts by descending score. `+inf` sentinels come first, ordered among
/// themselves by the scored value (descending); remaining ties go to the
/// lower `(locale, interval)` index.
pub fn rank_entries(s: &ScoreMatrix) -> RankedEntries {
    let (rows, cols) = s.shape();
    let scores = s.scores();
    let values = s.source_values();
    let mut entries: Vec<(MatrixEntryRef, f64)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| MatrixEntryRef::new(i, j)))
        .map(|e| (e, scores[(e.locale_index, e.interval_index)]))
        .collect();
    entries.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then_with(|| {
                if *sa == f64::INFINITY {
                    let va = values[(a.locale_index, a.interval_index)];
                    let vb = values[(b.locale_index, b.interval_index)];
                    vb.total_cmp(&va)
                } else {
                    Ordering::Equal
                }
            })
            .then_with(|| a.cmp(b))
    });
    RankedEntries { entries }
}

/// CSV with columns `rank,locale,interval_start,score`.
pub fn write_ranked<W: Write>(ranked: &RankedEntries, s: &ScoreMatrix, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "locale", "interval_start", "score"])?;
    for (r, (e, score)) in ranked.entries().iter().enumerate() {
        out.write_record([
            (r + 1).to_string(),
            s.locales()[e.locale_index].clone(),
            s.intervals()[e.interval_index].start.to_string(),
            format_sig(*score, 9),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn ranked_to_csv(ranked: &RankedEntries, s: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_ranked(ranked, s, std::io::BufWriter::new(std::fs::File::create(path)?))
}
