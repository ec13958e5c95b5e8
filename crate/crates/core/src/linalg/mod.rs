//! Dense complex linear algebra on density matrices.

mod eig;
pub mod io;
mod matrix;

pub use eig::{
    hermitian_eig, hermitian_eig_unchecked, hermitian_eig_warm, EigenDecomposition,
    EIG_HERMITIAN_TOL,
};
pub use matrix::{ComplexMatrix, DensityMatrix, HERMITIAN_TOL, PSD_TOL, TRACE_TOL};

pub(crate) use matrix::check_dims;


use crate::error::{Error, Result};

/// Kronecker product `a ⊗ b` of square matrices.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.kron(b)
}

/// Mixed-radix digits of `index` for the given local dimensions, first party most significant.
pub(crate) fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

pub(crate) fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Transposes the tensor factors listed in `parties` of a matrix acting on `dims`.
pub fn partial_transpose_parties(
    m: &ComplexMatrix,
    dims: &[usize],
    parties: &[usize],
) -> Result<ComplexMatrix> {
    let n = m.require_square()?;
    check_dims(dims, n)?;
    if let Some(&bad) = parties.iter().find(|&&p| p >= dims.len()) {
        return Err(Error::InvalidSubsystem {
            index: bad,
            parties: dims.len(),
        });
    }
    let mut flip = vec![false; dims.len()];
    for &p in parties {
        flip[p] = true;
    }
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            let (mut ti, mut tj) = (di.clone(), dj.clone());
            for (k, &f) in flip.iter().enumerate() {
                if f {
                    ti[k] = dj[k];
                    tj[k] = di[k];
                }
            }
            out[(compose(&ti, dims), compose(&tj, dims))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Partial transpose of `rho` on a single subsystem.
pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<ComplexMatrix> {
    partial_transpose_parties(rho.matrix(), rho.dims(), &[subsystem])
}

fn eigenvalues_of_difference(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Vec<f64>> {
    a.require_square()?;
    a.require_same_shape(b)?;
    let diff = a - b;
    Ok(hermitian_eig(&diff)?.eigenvalues)
}

/// Half the sum of absolute eigenvalues of `a - b`.
pub fn trace_distance(a: impl AsRef<ComplexMatrix>, b: impl AsRef<ComplexMatrix>) -> Result<f64> {
    let mu = eigenvalues_of_difference(a.as_ref(), b.as_ref())?;
    Ok(0.5 * mu.iter().map(|x| x.abs()).sum::<f64>())
}

/// `sqrt(Tr[(a - b)^2])`, i.e. the Frobenius norm of the difference.
pub fn hs_distance(a: impl AsRef<ComplexMatrix>, b: impl AsRef<ComplexMatrix>) -> Result<f64> {
    let (a, b) = (a.as_ref(), b.as_ref());
    a.require_square()?;
    a.require_same_shape(b)?;
    Ok((a - b).frobenius_norm())
}

/// `Tr rho^2`.
pub fn purity(rho: impl AsRef<ComplexMatrix>) -> Result<f64> {
    let m = rho.as_ref();
    m.require_square()?;
    // Tr(M M) = sum_ij M_ij M_ji, real for Hermitian M.
    Ok(m.trace_product_re(m))
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let e = hermitian_eig(m)?;
    Ok(e.eigenvalues.first().copied().unwrap_or(0.0))
}

pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}
