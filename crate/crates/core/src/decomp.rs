//! Spectral machinery: cyclic Jacobi for Hermitian eigenproblems,
//! one-sided Jacobi for singular values, Householder QR.
//!
//! Jacobi is chosen over faster reductions because it is simple,
//! deterministic, and accurate at the dimensions this crate works with.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Operator;

/// Eigenvalues (descending) and a unitary of eigenvectors for a Hermitian
/// operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Operator,
}

impl SpectralDecomposition {
    /// Residual ||X - Q L Q^dag||_F of the reconstruction.
    pub fn reconstruction_residual(&self, x: &Operator) -> f64 {
        let q = &self.eigenvectors;
        let lam = Operator::diagonal(
            &self
                .eigenvalues
                .iter()
                .map(|&l| Complex64::new(l, 0.0))
                .collect::<Vec<_>>(),
        );
        let rebuilt = q.mul(&lam).mul(&q.adjoint());
        x.sub(&rebuilt).frobenius_norm()
    }
}

const HERMITICITY_REL_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-15;

/// Two-sided rotation parameters (c real, s complex with the phase of the
/// off-diagonal element folded in) that diagonalise the Hermitian 2x2 block
/// [[app, apq], [conj(apq), aqq]].
fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> (f64, Complex64) {
    let m = apq.norm();
    let phase = apq / m; // e^{i phi}
    let zeta = (aqq - app) / (2.0 * m);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    (c, s * phase)
}

/// Cyclic Jacobi diagonalisation of a Hermitian operator. The input is
/// symmetrised first; inputs farther than 1e-10 (relative) from Hermitian
/// are rejected. Within a degenerate eigenvalue cluster the eigenvector
/// choice carries no guarantee; callers must not depend on it.
pub fn hermitian_eig(x: &Operator) -> Result<SpectralDecomposition> {
    if !x.is_square() {
        return Err(Error::Dimension("eigendecomposition of non-square operator".into()));
    }
    if !x.is_hermitian(HERMITICITY_REL_TOL) {
        let residual = x.sub(&x.adjoint()).frobenius_norm()
            / x.frobenius_norm().max(f64::MIN_POSITIVE);
        return Err(Error::NonHermitian { residual });
    }
    let n = x.rows();
    let mut a = x.symmetrized();
    let mut q = Operator::identity(&[n]);
    let scale = a.frobenius_norm();
    if scale == 0.0 || n == 1 {
        let eigenvalues = (0..n).map(|i| a[(i, i)].re).collect();
        return Ok(SpectralDecomposition { eigenvalues, eigenvectors: q });
    }

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for qq in (p + 1)..n {
                off += a[(p, qq)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..n - 1 {
            for r in (p + 1)..n {
                let apq = a[(p, r)];
                if apq.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (c, s) = jacobi_rotation(a[(p, p)].re, a[(r, r)].re, apq);
                // Columns: A <- A R with R = [[c, s'], [-conj(s'), c]] in the
                // convention below; derived so that R^dag A R has zero (p, r).
                apply_right_rotation(&mut a, p, r, c, s);
                apply_left_rotation(&mut a, p, r, c, s);
                apply_right_rotation(&mut q, p, r, c, s);
                let app = a[(p, p)];
                let arr = a[(r, r)];
                a.set(p, p, Complex64::new(app.re, 0.0));
                a.set(r, r, Complex64::new(arr.re, 0.0));
                a.set(p, r, Complex64::new(0.0, 0.0));
                a.set(r, p, Complex64::new(0.0, 0.0));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Operator::zeros(&[n], &[n]);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, q[(row, old_col)]);
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: vectors })
}

/// A <- A R on columns (p, q), with R = [[c, s], [-conj(s), c]] scaled so the
/// pair (c, s) comes from `jacobi_rotation`.
fn apply_right_rotation(a: &mut Operator, p: usize, q: usize, c: f64, s: Complex64) {
    let n = a.rows();
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a.set(i, p, aip * c - aiq * s.conj());
        a.set(i, q, aip * s + aiq * c);
    }
}

/// A <- R^dag A on rows (p, q).
fn apply_left_rotation(a: &mut Operator, p: usize, q: usize, c: f64, s: Complex64) {
    let m = a.cols();
    for j in 0..m {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a.set(p, j, apj * c - aqj * s);
        a.set(q, j, apj * s.conj() + aqj * c);
    }
}

/// Singular values (descending) via one-sided Jacobi on the Gram pairs of
/// columns; works on any rectangular matrix.
pub fn singular_values(x: &Operator) -> Vec<f64> {
    // Operate on the factor with fewer columns.
    let mut work = if x.rows() >= x.cols() { x.clone() } else { x.adjoint() };
    let m = work.rows();
    let n = work.cols();
    if n == 0 || m == 0 {
        return Vec::new();
    }

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    let aip = work[(i, p)];
                    let aiq = work[(i, q)];
                    alpha += aip.norm_sqr();
                    beta += aiq.norm_sqr();
                    gamma += aip.conj() * aiq;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s) = jacobi_rotation(alpha, beta, gamma);
                for i in 0..m {
                    let aip = work[(i, p)];
                    let aiq = work[(i, q)];
                    work.set(i, p, aip * c - aiq * s.conj());
                    work.set(i, q, aip * s + aiq * c);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..n)
        .map(|j| {
            (0..m)
                .map(|i| work[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Householder QR. Returns (Q, R) with Q unitary (square) and R upper
/// triangular, A = Q R.
pub fn qr(a: &Operator) -> (Operator, Operator) {
    let m = a.rows();
    let n = a.cols();
    let mut r = a.clone();
    let mut q = Operator::identity(&[m]);
    for j in 0..n.min(m.saturating_sub(1)) {
        // Householder vector for column j, rows j..m.
        let mut norm2 = 0.0;
        for i in j..m {
            norm2 += r[(i, j)].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm <= f64::MIN_POSITIVE {
            continue;
        }
        let x0 = r[(j, j)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * norm;
        let mut w: Vec<Complex64> = (j..m).map(|i| r[(i, j)]).collect();
        w[0] -= beta;
        let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        if ww <= f64::MIN_POSITIVE {
            continue;
        }
        let tau = 2.0 / ww;
        // R <- H R on rows j..m.
        for col in j..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (k, wi) in w.iter().enumerate() {
                dot += wi.conj() * r[(j + k, col)];
            }
            dot *= tau;
            for (k, wi) in w.iter().enumerate() {
                let v = r[(j + k, col)] - wi * dot;
                r.set(j + k, col, v);
            }
        }
        // Q <- Q H on columns j..m.
        for row in 0..m {
            let mut dot = Complex64::new(0.0, 0.0);
            for (k, wi) in w.iter().enumerate() {
                dot += q[(row, j + k)] * *wi;
            }
            dot *= tau;
            for (k, wi) in w.iter().enumerate() {
                let v = q[(row, j + k)] - dot * wi.conj();
                q.set(row, j + k, v);
            }
        }
        r.set(j, j, beta);
        for i in (j + 1)..m {
            r.set(i, j, Complex64::new(0.0, 0.0));
        }
    }
    (q, r)
}
