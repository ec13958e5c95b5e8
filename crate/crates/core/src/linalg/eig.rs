//! Cyclic Jacobi eigensolver for complex Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` with a diagonal
//! unitary, then applies the classical real Jacobi rotation. Eigenvalues are
//! returned in non-decreasing order with the matching eigenvector columns.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`hermitian_eig`].
pub const EIG_HERMITIAN_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Non-decreasing.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `U f(Lambda) U^dagger` for a real function of the eigenvalues.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let u = self.eigenvectors.as_slice();
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in mapped.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let uik = u[i * n + k] * lam;
                if uik.re == 0.0 && uik.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += uik * u[j * n + k].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        let n = self.eigenvalues.len();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    m.require_square()?;
    let herm = m.hermiticity_error();
    if herm > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    Ok(hermitian_eig_unchecked(m))
}

/// As [`hermitian_eig`] without the Hermiticity check; the strictly upper
/// triangle is taken as authoritative.
pub fn hermitian_eig_unchecked(m: &ComplexMatrix) -> EigenDecomposition {
    let n = m.rows();
    let mut a = m.hermitian_part().into_vec();
    let mut v = ComplexMatrix::identity(n).into_vec();
    jacobi(&mut a, &mut v, n);
    finish(a, v, n)
}

/// Eigendecomposition started from a guess basis `u` (unitary). When `u`
/// nearly diagonalises `m`, as happens between consecutive optimiser steps,
/// this needs only one or two sweeps.
pub fn hermitian_eig_warm(m: &ComplexMatrix, u: &ComplexMatrix) -> EigenDecomposition {
    let n = m.rows();
    let rotated = u.adjoint().matmul(&m.hermitian_part()).matmul(u);
    let mut a = rotated.hermitian_part().into_vec();
    let mut v = u.clone().into_vec();
    jacobi(&mut a, &mut v, n);
    finish(a, v, n)
}

fn finish(a: Vec<Complex64>, v: Vec<Complex64>, n: usize) -> EigenDecomposition {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[i * n + i].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

fn off_diagonal_sq(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            s += a[p * n + q].norm_sqr();
        }
    }
    2.0 * s
}

fn jacobi(a: &mut [Complex64], v: &mut [Complex64], n: usize) {
    if n < 2 {
        return;
    }
    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return;
    }
    let target = (f64::EPSILON * f64::EPSILON) * total;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_sq(a, n) <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(a, v, n, p, q);
            }
        }
    }
}

#[inline]
fn rotate(a: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    // Negligible pivot relative to both diagonal entries: drop it.
    if app.abs() + 1e3 * mag == app.abs() && aqq.abs() + 1e3 * mag == aqq.abs() {
        a[p * n + q] = Complex64::new(0.0, 0.0);
        a[q * n + p] = Complex64::new(0.0, 0.0);
        return;
    }
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = apq / mag;
    let phase_c = phase.conj();
    let s_pc = phase_c * s;
    let c_pc = phase_c * c;

    // A <- A V with V = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on (p, q).
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * c - akq * s_pc;
        a[k * n + q] = akp * s + akq * c_pc;
    }
    let s_p = phase * s;
    let c_p = phase * c;
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = apk * c - aqk * s_p;
        a[q * n + k] = apk * s + aqk * c_p;
    }
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p] = Complex64::new(app - t * mag, 0.0);
    a[q * n + q] = Complex64::new(aqq + t * mag, 0.0);

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * c - vkq * s_pc;
        v[k * n + q] = vkp * s + vkq * c_pc;
    }
}
