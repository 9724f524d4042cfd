//! Anomaly scores for modification-matrix entries.
//!
//! Statistical detectors compare an entry with a pool of other entries
//! (its own locale's history, a window of neighbouring columns, or the whole
//! matrix). Factorisation detectors score the part of an entry a low-rank
//! model cannot explain.

mod nmf;
mod rank;
mod rpca;
mod score_csv;
mod statistical;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::modmatrix::{Interval, ModificationMatrix};
use crate::seed;
use crate::vrf_io::ChangeType;

pub use nmf::{nmf, nndsvd, NmfOptions, NmfResult};
pub use rank::{rank_entries, ranked_to_csv, write_ranked, RankedEntries};
pub use rpca::{default_lambda, rpca, RpcaOptions, RpcaResult};
pub use score_csv::{csv_to_scores, read_scores, scores_to_csv, write_scores};
pub use statistical::{cross_locale_scores, global_scores, temporal_scores};
pub use stats::{iqr_score, zscore, Stat};

pub const DEFAULT_NMF_RANK: usize = 5;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Temporal(Stat),
    /// Window of `2w + 1` columns.
    CrossLocale { stat: Stat, w: usize },
    Global(Stat),
    Nmf { k: usize },
    Rpca { lambda: Option<f64> },
}

impl Method {
    /// The ten methods compared in the sweep, in report order.
    pub fn comparison_set() -> Vec<Method> {
        vec![
            Method::Nmf { k: DEFAULT_NMF_RANK },
            Method::Rpca { lambda: None },
            Method::CrossLocale { stat: Stat::Std, w: 2 },
            Method::CrossLocale { stat: Stat::Std, w: 1 },
            Method::CrossLocale { stat: Stat::Iqr, w: 2 },
            Method::CrossLocale { stat: Stat::Iqr, w: 1 },
            Method::Temporal(Stat::Std),
            Method::Temporal(Stat::Iqr),
            Method::Global(Stat::Std),
            Method::Global(Stat::Iqr),
        ]
    }

    pub fn id(&self) -> String {
        match self {
            Method::Temporal(s) => format!("temporal_{}", s.as_str()),
            Method::CrossLocale { stat, w } => format!("cl_{}_{}", stat.as_str(), 2 * w + 1),
            Method::Global(s) => format!("global_{}", s.as_str()),
            Method::Nmf { .. } => "nmf".into(),
            Method::Rpca { .. } => "rpca".into(),
        }
    }

    /// Parses a method name. `window` (full width, odd) applies to
    /// `cl_std`/`cl_iqr` without a width suffix, `k` to `nmf`, `lambda` to
    /// `rpca`.
    pub fn parse(name: &str, window: Option<usize>, k: Option<usize>, lambda: Option<f64>) -> Result<Method> {
        let unknown = || {
            Error::Config(format!(
                "unknown method '{name}' (expected one of temporal_std, temporal_iqr, cl_std[_W], cl_iqr[_W], global_std, global_iqr, nmf, rpca)"
            ))
        };
        let method = match name {
            "temporal_std" => Method::Temporal(Stat::Std),
            "temporal_iqr" => Method::Temporal(Stat::Iqr),
            "global_std" => Method::Global(Stat::Std),
            "global_iqr" => Method::Global(Stat::Iqr),
            "nmf" => Method::Nmf {
                k: k.unwrap_or(DEFAULT_NMF_RANK),
            },
            "rpca" => Method::Rpca { lambda },
            other => {
                let rest = other.strip_prefix("cl_").ok_or_else(unknown)?;
                let (stat, width) = match rest.split_once('_') {
                    Some((s, w)) => (s, Some(w.parse::<usize>().map_err(|_| unknown())?)),
                    None => (rest, None),
                };
                let stat: Stat = stat.parse().map_err(|_| unknown())?;
                let width = match (width, window) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Config(format!(
                            "method '{name}' conflicts with window {b}"
                        )))
                    }
                    (Some(a), _) => a,
                    (None, Some(b)) => b,
                    (None, None) => DEFAULT_WINDOW,
                };
                if width % 2 == 0 {
                    return Err(Error::Config(format!(
                        "cross-locale window must be odd (2w + 1), got {width}"
                    )));
                }
                Method::CrossLocale { stat, w: width / 2 }
            }
        };
        if let Method::Nmf { k: 0 } = method {
            return Err(Error::Config("NMF rank k must be at least 1".into()));
        }
        if let Method::Rpca { lambda: Some(l) } = method {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("λ must be positive, got {l}")));
            }
        }
        Ok(method)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::parse(s, None, None, None)
    }
}

/// Detector output aligned with its source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    method: Method,
    params: BTreeMap<String, String>,
    change_type: ChangeType,
    locales: Vec<String>,
    intervals: Vec<Interval>,
    scores: DMatrix<f64>,
    /// The scored values, used to order `+inf` sentinels.
    source_values: DMatrix<f64>,
}

impl ScoreMatrix {
    pub(crate) fn new(
        m: &ModificationMatrix,
        method: Method,
        scores: DMatrix<f64>,
        extra: Vec<(&str, String)>,
    ) -> Self {
        let mut params = base_params(&method);
        for (key, value) in extra {
            params.insert(key.to_string(), value);
        }
        Self {
            method,
            params,
            change_type: m.change_type(),
            locales: m.locales().to_vec(),
            intervals: m.intervals().to_vec(),
            scores,
            source_values: m.values().clone(),
        }
    }

    pub(crate) fn from_parts(
        method: Method,
        params: BTreeMap<String, String>,
        change_type: ChangeType,
        locales: Vec<String>,
        intervals: Vec<Interval>,
        scores: DMatrix<f64>,
        source_values: DMatrix<f64>,
    ) -> Self {
        Self {
            method,
            params,
            change_type,
            locales,
            intervals,
            scores,
            source_values,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &BTreeMap<String, String> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    pub fn change_type(&self) -> ChangeType {
        self.change_type
    }

    pub fn locales(&self) -> &[String] {
        &self.locales
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn source_values(&self) -> &DMatrix<f64> {
        &self.source_values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.scores.shape()
    }

    /// False when an iterative detector hit its iteration limit.
    pub fn converged(&self) -> bool {
        self.param("converged") != Some("false")
    }
}

fn base_params(method: &Method) -> BTreeMap<String, String> {
    let mut p = BTreeMap::new();
    p.insert("method".to_string(), method.id());
    match *method {
        Method::Temporal(s) | Method::Global(s) => {
            p.insert("stat".into(), s.as_str().into());
        }
        Method::CrossLocale { stat, w } => {
            p.insert("stat".into(), stat.as_str().into());
            p.insert("w".into(), w.to_string());
            p.insert("window".into(), (2 * w + 1).to_string());
        }
        Method::Nmf { k } => {
            p.insert("k".into(), k.to_string());
        }
        Method::Rpca { .. } => {}
    }
    p
}

/// Runs `method` on `m`. `seed` feeds the NMF initialisation fallback; the
/// other detectors are deterministic without it.
pub fn score_matrix(m: &ModificationMatrix, method: Method, seed: u64) -> Result<ScoreMatrix> {
    match method {
        Method::Temporal(stat) => temporal_scores(m, stat),
        Method::CrossLocale { stat, w } => cross_locale_scores(m, stat, w),
        Method::Global(stat) => global_scores(m, stat),
        Method::Nmf { k } => nmf_residual_scores(m, k, seed),
        Method::Rpca { lambda } => rpca_scores(
            m,
            RpcaOptions {
                lambda,
                ..RpcaOptions::default()
            },
        ),
    }
}

/// Signed residual `M - P Qᵀ` of a rank-`k` NMF.
pub fn nmf_residual_scores(m: &ModificationMatrix, k: usize, seed: u64) -> Result<ScoreMatrix> {
    let options = NmfOptions::default();
    let fit = nmf(m.values(), k, seed::derive(seed, "nmf", 0), options)?;
    let scores = fit.residual(m.values());
    Ok(ScoreMatrix::new(
        m,
        Method::Nmf { k },
        scores,
        vec![
            ("seed", seed.to_string()),
            ("tol", options.tol.to_string()),
            ("max_iter", options.max_iter.to_string()),
            ("iterations", fit.iterations.to_string()),
            ("converged", fit.converged.to_string()),
            ("objective", fit.objective.last().copied().unwrap_or(0.0).to_string()),
        ],
    ))
}

/// Sparse component of the low-rank plus sparse decomposition.
pub fn rpca_scores(m: &ModificationMatrix, options: RpcaOptions) -> Result<ScoreMatrix> {
    let fit = rpca(m.values(), options)?;
    Ok(ScoreMatrix::new(
        m,
        Method::Rpca {
            lambda: options.lambda,
        },
        fit.sparse,
        vec![
            ("lambda", fit.lambda.to_string()),
            ("tol", options.tol.to_string()),
            ("max_iter", options.max_iter.to_string()),
            ("iterations", fit.iterations.to_string()),
            ("converged", fit.converged.to_string()),
            ("residual", fit.residual.to_string()),
            ("rank", fit.rank.to_string()),
        ],
    ))
}
