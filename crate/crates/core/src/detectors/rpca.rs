//! Principal component pursuit, `min ||L||_* + λ||S||_1` s.t. `M = L + S`,
//! solved by alternating singular-value and entrywise soft thresholding
//! inside an inexact augmented-Lagrangian loop.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpcaOptions {
    /// `None` selects `1 / sqrt(max(ℓ, d))`.
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpcaOptions {
    fn default() -> Self {
        Self {
            lambda: None,
            tol: 1e-7,
            max_iter: 1000,
        }
    }
}

pub fn default_lambda(rows: usize, cols: usize) -> f64 {
    1.0 / (rows.max(cols) as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// `||M - L - S||_F / ||M||_F` of the returned iterate.
    pub residual: f64,
    pub rank: usize,
    pub converged: bool,
}

pub fn rpca(m: &DMatrix<f64>, options: RpcaOptions) -> Result<RpcaResult> {
    let (rows, cols) = m.shape();
    let lambda = options.lambda.unwrap_or_else(|| default_lambda(rows, cols));
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Precondition(format!("RPCA λ must be positive, got {lambda}")));
    }
    let m_norm = m.norm();
    if m_norm == 0.0 || rows * cols == 0 {
        return Ok(RpcaResult {
            low_rank: DMatrix::zeros(rows, cols),
            sparse: DMatrix::zeros(rows, cols),
            lambda,
            iterations: 0,
            residual: 0.0,
            rank: 0,
            converged: true,
        });
    }
    let spectral = linalg::spectral_norm(m);
    let mut y = m / spectral.max(m.amax() / lambda);
    let mut mu = 1.25 / spectral;
    let mu_max = mu * 1e7;
    let rho = 1.5;

    let mut s = DMatrix::zeros(rows, cols);
    let mut l = DMatrix::zeros(rows, cols);
    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>, usize)> = None;
    let mut rank = 0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < options.max_iter {
        iterations += 1;
        let (next_l, r) = linalg::singular_value_threshold(&(m - &s + &y / mu), 1.0 / mu);
        l = next_l;
        rank = r;
        let shrink = lambda / mu;
        s = (m - &l + &y / mu).map(|x| linalg::soft_threshold(x, shrink));
        let z = m - &l - &s;
        residual = z.norm() / m_norm;
        y += &z * mu;
        mu = (mu * rho).min(mu_max);
        if residual <= options.tol {
            break;
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, l.clone(), s.clone(), rank));
        }
    }
    let converged = residual <= options.tol;
    if !converged {
        log::warn!("RPCA stopped after {iterations} iterations at relative residual {residual:.3e}");
        if let Some((r, bl, bs, brank)) = best {
            if r < residual {
                residual = r;
                l = bl;
                s = bs;
                rank = brank;
            }
        }
    }
    Ok(RpcaResult {
        low_rank: l,
        sparse: s,
        lambda,
        iterations,
        residual,
        rank,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_is_trivial() {
        let r = rpca(&DMatrix::zeros(3, 4), RpcaOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.low_rank.iter().chain(r.sparse.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn spike_lands_in_sparse_part() {
        let u = [1.0, 0.8, 1.2, 0.9, 1.1, 1.0];
        let v = [0.9, 1.0, 1.1, 1.0, 0.95, 1.05, 1.0, 0.9];
        let mut m = DMatrix::from_fn(6, 8, |i, j| u[i] * v[j]);
        m[(0, 0)] += 10.0;
        let r = rpca(&m, RpcaOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.residual <= 1e-7);
        assert!((m.clone() - &r.low_rank - &r.sparse).norm() / m.norm() <= 1e-7);
        assert_eq!(r.sparse.iamax_full(), (0, 0));
    }

    #[test]
    fn rejects_bad_lambda() {
        let opts = RpcaOptions {
            lambda: Some(0.0),
            ..RpcaOptions::default()
        };
        assert!(rpca(&DMatrix::identity(2, 2), opts).is_err());
    }
}
