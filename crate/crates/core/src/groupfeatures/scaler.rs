use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature standardisation fitted on a training collection.
///
/// Missing values (`NaN`) are first replaced by the column median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Precondition(format!(
                "standardisation needs at least 2 vectors, got {}",
                rows.len()
            )));
        }
        let width = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width,
                actual: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mut scaler = Scaler {
            median: Vec::with_capacity(width),
            mean: Vec::with_capacity(width),
            std: Vec::with_capacity(width),
        };
        for f in 0..width {
            let med = median(rows.iter().map(|r| r[f]).filter(|x| !x.is_nan()).collect());
            let col: Vec<f64> = rows.iter().map(|r| if r[f].is_nan() { med } else { r[f] }).collect();
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let (mean, std) = if lo == hi {
                (lo, 0.0)
            } else {
                let m = col.iter().sum::<f64>() / n;
                (m, (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
            };
            scaler.median.push(med);
            scaler.mean.push(mean);
            scaler.std.push(std);
        }
        Ok(scaler)
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::Dimension {
                expected: self.width(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(f, &x)| {
                let x = if x.is_nan() { self.median[f] } else { x };
                if self.std[f] > 0.0 {
                    (x - self.mean[f]) / self.std[f]
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Fits a scaler on `rows` and returns the standardised rows with it.
pub fn standardize(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Scaler)> {
    let scaler = Scaler::fit(rows)?;
    Ok((scaler.transform_all(rows)?, scaler))
}
