//! Rank-k non-negative factorisation `M ≈ P Qᵀ` by cyclic coordinate descent
//! on the squared Frobenius objective, started from NNDSVD.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmfResult {
    /// `ℓ × k`.
    pub p: DMatrix<f64>,
    /// `d × k`.
    pub q: DMatrix<f64>,
    /// `||M - P Qᵀ||²_F` at initialisation and after every sweep.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl NmfResult {
    pub fn residual(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m - &self.p * self.q.transpose()
    }
}

/// Non-negative double SVD initialisation (Boutsidis & Gallopoulos).
///
/// Returns `(W, H)` with `W: ℓ × k`, `H: k × d`. Factor columns left at zero
/// by a rank-deficient input are refilled with seeded uniform draws so that
/// every component can still move.
pub fn nndsvd(m: &DMatrix<f64>, k: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let linalg::Svd {
        u,
        singular_values: s,
        v_t,
    } = linalg::svd(m);
    let mut w = DMatrix::zeros(rows, k);
    let mut h = DMatrix::zeros(k, cols);
    for t in 0..k.min(s.len()) {
        let x = u.column(t);
        let y = v_t.row(t);
        if t == 0 {
            let root = s[0].sqrt();
            w.set_column(0, &(x.abs() * root));
            h.set_row(0, &(y.abs() * root));
            continue;
        }
        let (xp, xn) = (x.map(|a| a.max(0.0)), x.map(|a| (-a).max(0.0)));
        let (yp, yn) = (y.map(|a| a.max(0.0)), y.map(|a| (-a).max(0.0)));
        let (xpn, xnn, ypn, ynn) = (xp.norm(), xn.norm(), yp.norm(), yn.norm());
        let (mp, mn) = (xpn * ypn, xnn * ynn);
        let (uu, vv, sigma) = if mp > mn {
            (xp / xpn, yp / ypn, mp)
        } else if mn > 0.0 {
            (xn / xnn, yn / ynn, mn)
        } else {
            continue;
        };
        let lambda = (s[t] * sigma).sqrt();
        w.set_column(t, &(uu * lambda));
        h.set_row(t, &(vv * lambda));
    }
    w.apply(|x| {
        if *x < 1e-6 * f64::EPSILON {
            *x = 0.0
        }
    });
    h.apply(|x| {
        if *x < 1e-6 * f64::EPSILON {
            *x = 0.0
        }
    });

    let mean = m.mean();
    if mean > 0.0 {
        let scale = (mean / k as f64).sqrt();
        let mut rng = seed::sub_rng(seed, "nndsvd-fill", 0);
        for t in 0..k {
            if w.column(t).iter().all(|&x| x == 0.0) {
                for i in 0..rows {
                    w[(i, t)] = scale * rng.random::<f64>();
                }
            }
            if h.row(t).iter().all(|&x| x == 0.0) {
                for j in 0..cols {
                    h[(t, j)] = scale * rng.random::<f64>();
                }
            }
        }
    }
    (w, h)
}

/// One cyclic sweep over the columns of `w` with `h` fixed, where
/// `hht = H Hᵀ` and `xht = X Hᵀ`.
fn update_factor(w: &mut DMatrix<f64>, hht: &DMatrix<f64>, xht: &DMatrix<f64>) {
    let k = w.ncols();
    for t in 0..k {
        let hess = hht[(t, t)];
        if hess == 0.0 {
            continue;
        }
        for i in 0..w.nrows() {
            let mut grad = -xht[(i, t)];
            for r in 0..k {
                grad += hht[(t, r)] * w[(i, r)];
            }
            w[(i, t)] = (w[(i, t)] - grad / hess).max(0.0);
        }
    }
}

fn objective(m: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (m - w * h).norm_squared()
}

pub fn nmf(m: &DMatrix<f64>, k: usize, seed: u64, options: NmfOptions) -> Result<NmfResult> {
    let (rows, cols) = m.shape();
    if k == 0 || k > rows.min(cols) {
        return Err(Error::Precondition(format!(
            "NMF rank k = {k} must be in 1..={} for a {rows}×{cols} matrix",
            rows.min(cols)
        )));
    }
    if let Some(x) = m.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Precondition(format!(
            "NMF needs a non-negative matrix, found {x}"
        )));
    }
    let (mut w, mut h) = nndsvd(m, k, seed);
    let mut history = vec![objective(m, &w, &h)];
    let mut converged = history[0] == 0.0;
    let mut iterations = 0;
    let mt = m.transpose();
    while !converged && iterations < options.max_iter {
        let hht = &h * h.transpose();
        let xht = m * h.transpose();
        update_factor(&mut w, &hht, &xht);

        let mut ht = h.transpose();
        let wtw = w.transpose() * &w;
        let xtw = &mt * &w;
        update_factor(&mut ht, &wtw, &xtw);
        h = ht.transpose();

        iterations += 1;
        let prev = *history.last().unwrap();
        let cur = objective(m, &w, &h);
        history.push(cur);
        converged = cur == 0.0 || (prev - cur) <= options.tol * prev;
    }
    if !converged {
        log::warn!("NMF stopped after {iterations} iterations without reaching tol {}", options.tol);
    }
    Ok(NmfResult {
        p: w,
        q: h.transpose(),
        objective: history,
        iterations,
        converged,
    })
}
