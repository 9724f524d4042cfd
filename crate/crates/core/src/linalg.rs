//! Dense linear-algebra helpers over [`nalgebra::DMatrix`].
//!
//! The SVD is nalgebra's Golub-Kahan bidiagonalisation with implicit QR
//! sweeps: deterministic, and fast enough for the ~100 × 150 matrices this
//! crate works with.

use nalgebra::{DMatrix, DVector, SVD};

pub struct Svd {
    pub u: DMatrix<f64>,
    /// Non-increasing.
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Svd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, cols),
        };
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
        .expect("SVD without an iteration limit always converges");
    Svd {
        u: svd.u.expect("requested U"),
        singular_values: svd.singular_values,
        v_t: svd.v_t.expect("requested V^T"),
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .expect("SVD without an iteration limit always converges");
    svd.singular_values.iter().copied().collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// `U · shrink(Σ, tau) · Vᵀ`: the proximal operator of `tau · ||·||_*`.
/// Returns the thresholded matrix and its rank.
pub fn singular_value_threshold(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let Svd {
        u,
        singular_values,
        v_t,
    } = svd(m);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let mut rank = 0;
    for (k, &s) in singular_values.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk <= 0.0 {
            break;
        }
        rank += 1;
        out += (u.column(k) * shrunk) * v_t.row(k);
    }
    (out, rank)
}
