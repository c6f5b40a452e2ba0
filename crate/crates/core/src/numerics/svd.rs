//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy of `A` are rotated pairwise until every pair
//! is orthogonal to within `tol` relative to the product of their norms.
//! The accumulated rotations give `V`; the final column norms are the
//! singular values and the normalized columns give `U`. Wide inputs are
//! handled by factoring the transpose.

use thiserror::Error;

use super::matrix::{dot, norm2, Matrix};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 60;
pub const MAX_DIM: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvdError {
    #[error("jacobi svd did not converge after {sweeps} sweeps (max off-diagonal ratio {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("svd input {rows}x{cols} exceeds the {MAX_DIM}x{MAX_DIM} limit")]
    TooLarge { rows: usize, cols: usize },
    #[error("svd input contains non-finite entries")]
    NonFinite,
}

/// Thin SVD: `left` is rows×k, `right_t` is k×cols with k = min(rows, cols).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: Matrix,
    pub singulars: Vec<f64>,
    pub right_t: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|_| true)
    }

    /// Sum of the rank-one terms whose index passes `keep`.
    pub fn reconstruct_with(&self, keep: impl Fn(usize) -> bool) -> Matrix {
        let (m, n) = (self.left.rows(), self.right_t.cols());
        let mut out = Matrix::zeros(m, n);
        for (k, &s) in self.singulars.iter().enumerate() {
            if !keep(k) || s == 0.0 {
                continue;
            }
            for i in 0..m {
                let a = s * self.left[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * self.right_t[(k, j)];
                }
            }
        }
        out
    }
}

pub fn svd_default(m: &Matrix) -> Result<SvdResult, SvdError> {
    svd(m, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)
}

pub fn svd(m: &Matrix, tol: f64, max_sweeps: usize) -> Result<SvdResult, SvdError> {
    assert!(tol > 0.0, "svd tolerance must be positive");
    if m.rows() > MAX_DIM || m.cols() > MAX_DIM {
        return Err(SvdError::TooLarge {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(SvdError::NonFinite);
    }
    if m.rows() < m.cols() {
        let t = tall_svd(&m.transpose(), tol, max_sweeps)?;
        return Ok(SvdResult {
            left: t.right_t.transpose(),
            singulars: t.singulars,
            right_t: t.left.transpose(),
        });
    }
    tall_svd(m, tol, max_sweeps)
}

fn tall_svd(m: &Matrix, tol: f64, max_sweeps: usize) -> Result<SvdResult, SvdError> {
    let (rows, n) = (m.rows(), m.cols());
    // column-major working storage
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // columns this small are rounding residue and are left alone
    let negligible = (f64::EPSILON * m.frobenius_norm()).powi(2);
    let mut converged = n < 2;
    let mut residual = 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        residual = 0.0_f64;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha <= negligible || beta <= negligible || gamma == 0.0 {
                    continue;
                }
                let ratio = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                residual = residual.max(ratio);
                if ratio <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(SvdError::NoConvergence { sweeps, residual });
    }

    let norms: Vec<f64> = a.iter().map(|col| norm2(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms[order[0]];
    let floor = sigma_max * (rows.max(n) as f64) * f64::EPSILON;

    let mut left_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    let mut singulars = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        singulars.push(s);
        if s > floor && s > 0.0 {
            left_cols.push(a[j].iter().map(|x| x / s).collect());
        } else {
            left_cols.push(Vec::new());
            missing.push(k);
        }
    }
    complete_basis(&mut left_cols, &missing, rows);

    let mut left = Matrix::zeros(rows, n);
    let mut right_t = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..rows {
            left[(i, k)] = left_cols[k][i];
        }
        for i in 0..n {
            right_t[(k, i)] = v[j][i];
        }
    }
    Ok(SvdResult {
        left,
        singulars,
        right_t,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the empty columns listed in `missing` with unit vectors orthogonal
/// to every other column, picking the standard basis vector with the
/// largest residual after two Gram-Schmidt passes.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize], dim: usize) {
    for &k in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..dim {
            let mut cand = vec![0.0; dim];
            cand[e] = 1.0;
            for _ in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == k || col.is_empty() {
                        continue;
                    }
                    let proj = dot(&cand, col);
                    for (c, x) in cand.iter_mut().zip(col) {
                        *c -= proj * x;
                    }
                }
            }
            let norm = norm2(&cand);
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
        }
        let (norm, cand) = best.expect("dimension is positive");
        cols[k] = cand.into_iter().map(|x| x / norm).collect();
    }
}
