//! Pool statistics and the two robust scores.
//!
//! When the denominator is zero the score is 0 for values at or below the
//! pool's location and `+inf` above it.

/// `(x - mean) / std`.
pub fn zscore(x: f64, mean: f64, std: f64) -> f64 {
    sentinel_ratio(x - mean, std)
}

/// `(x - q3) / (q3 - q1)`.
pub fn iqr_score(x: f64, q1: f64, q3: f64) -> f64 {
    sentinel_ratio(x - q3, q3 - q1)
}

fn sentinel_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else if numerator <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64], mean: f64) -> f64 {
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Linearly interpolated quantile of an ascending sample, position `q (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stat {
    Std,
    Iqr,
}

impl Stat {
    pub fn as_str(self) -> &'static str {
        match self {
            Stat::Std => "std",
            Stat::Iqr => "iqr",
        }
    }
}

impl std::str::FromStr for Stat {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "std" => Ok(Stat::Std),
            "iqr" => Ok(Stat::Iqr),
            _ => Err(crate::Error::Config(format!(
                "unknown statistic '{s}' (expected std or iqr)"
            ))),
        }
    }
}

/// Location/spread summary of a statistic pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolStats {
    Std { mean: f64, std: f64 },
    Iqr { q1: f64, q3: f64 },
    /// No usable entries: every score is 0.
    Empty,
}

impl PoolStats {
    /// Summarises `pool`; sorts it in place.
    pub fn compute(stat: Stat, pool: &mut [f64]) -> Self {
        if pool.is_empty() {
            return PoolStats::Empty;
        }
        pool.sort_by(f64::total_cmp);
        let (lo, hi) = (pool[0], pool[pool.len() - 1]);
        match stat {
            // A constant pool has exactly zero spread; summing would leave
            // rounding noise in both the mean and the deviation.
            Stat::Std if lo == hi => PoolStats::Std { mean: lo, std: 0.0 },
            Stat::Std => {
                let m = mean(pool);
                PoolStats::Std {
                    mean: m,
                    std: population_std(pool, m),
                }
            }
            Stat::Iqr => PoolStats::Iqr {
                q1: quantile_sorted(pool, 0.25),
                q3: quantile_sorted(pool, 0.75),
            },
        }
    }

    pub fn score(&self, x: f64) -> f64 {
        match *self {
            PoolStats::Std { mean, std } => zscore(x, mean, std),
            PoolStats::Iqr { q1, q3 } => iqr_score(x, q1, q3),
            PoolStats::Empty => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_examples() {
        let xs = [1.0, 2.0, 3.0];
        let m = mean(&xs);
        let s = population_std(&xs, m);
        assert!((s - 0.816_496_580_927_726).abs() < 1e-12);
        assert!((zscore(3.0, m, s) - 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(zscore(2.0, 2.0, s), 0.0);
        assert_eq!(zscore(4.0, 4.0, 0.0), 0.0);
        assert_eq!(zscore(5.0, 4.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn iqr_examples() {
        let mut xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        let stats = PoolStats::compute(Stat::Iqr, &mut xs);
        assert_eq!(stats, PoolStats::Iqr { q1: 2.0, q3: 4.0 });
        assert_eq!(stats.score(5.0), 0.5);
        assert_eq!(iqr_score(4.0, 2.0, 4.0), 0.0);
        let mut flat = [2.0; 4];
        assert_eq!(PoolStats::compute(Stat::Iqr, &mut flat).score(7.0), f64::INFINITY);
    }

    #[test]
    fn constant_pool_is_exact() {
        let mut pool = [0.1; 7];
        let stats = PoolStats::compute(Stat::Std, &mut pool);
        assert_eq!(stats, PoolStats::Std { mean: 0.1, std: 0.0 });
        assert_eq!(stats.score(0.1), 0.0);
    }
}
