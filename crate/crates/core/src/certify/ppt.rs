//! Partial-transpose diagnostics, the two-qubit closest-state ansatz and an
//! alternating-projection oracle for the closest PPT state in Hilbert-Schmidt
//! distance.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig_unchecked, partial_transpose_parties, trace_distance, ComplexMatrix, DensityMatrix, PSD_TOL,
};

/// Smallest eigenvalue of the partial transpose over the parties in `cut`.
pub fn ppt_min_eigenvalue(rho: &DensityMatrix, cut: &[usize]) -> Result<f64> {
    let n = rho.dims().len();
    if cut.is_empty() || cut.len() >= n {
        return Err(Error::InvalidParameter(format!(
            "cut {cut:?} must be a proper non-empty subset of {n} parties"
        )));
    }
    let pt = partial_transpose_parties(rho.matrix(), rho.dims(), cut)?;
    Ok(hermitian_eig_unchecked(&pt).eigenvalues[0])
}

/// Outcome of the two-qubit ansatz for a closest separable state.
#[derive(Clone, Debug)]
pub struct AnsatzResult {
    /// Candidate state; may fail to be positive semidefinite.
    pub candidate: ComplexMatrix,
    pub valid: bool,
    pub min_eigenvalue: f64,
    pub trace_distance: f64,
    /// Smallest partial-transpose eigenvalue `lambda` of the input (negative).
    pub pt_min_eigenvalue: f64,
    /// `trace_distance <= -lambda + 1e-9`; only meaningful when `valid`.
    pub bound_holds: bool,
}

/// Builds the ansatz: diagonalise the partial transpose, drop its negative
/// eigenvalue `l1`, add `l1 / 3` to the other three and transpose back.
pub fn css_ansatz_two_qubit(rho: &DensityMatrix) -> Result<AnsatzResult> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "ansatz needs a two-qubit state, got dims {:?}",
            rho.dims()
        )));
    }
    let pt = partial_transpose_parties(rho.matrix(), rho.dims(), &[1])?;
    let eig = hermitian_eig_unchecked(&pt);
    let l1 = eig.eigenvalues[0];
    if l1 >= 0.0 {
        return Err(Error::InvalidParameter("ansatz defined for NPT states".into()));
    }
    let mut shifted = eig.clone();
    for (i, v) in shifted.eigenvalues.iter_mut().enumerate() {
        *v = if i == 0 { 0.0 } else { *v + l1 / 3.0 };
    }
    let shifted = shifted.reconstruct();
    let pt_psd = eig.eigenvalues[1] + l1 / 3.0 >= -PSD_TOL;
    let candidate = partial_transpose_parties(&shifted, rho.dims(), &[1])?.hermitian_part();
    let min_eigenvalue = hermitian_eig_unchecked(&candidate).eigenvalues[0];
    let valid = pt_psd && min_eigenvalue >= -PSD_TOL;
    let trace_distance = trace_distance(rho, &candidate)?;
    Ok(AnsatzResult {
        candidate,
        valid,
        min_eigenvalue,
        trace_distance,
        pt_min_eigenvalue: l1,
        bound_holds: trace_distance <= -l1 + 1e-9,
    })
}

/// Euclidean projection of a Hermitian matrix onto density matrices: shift
/// the spectrum so the clipped eigenvalues sum to one.
fn project_states(m: &ComplexMatrix) -> ComplexMatrix {
    let e = hermitian_eig_unchecked(m);
    let mut sorted = e.eigenvalues.clone();
    sorted.reverse();
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    e.reconstruct_with(|x| (x - tau).max(0.0))
}

/// Projection onto Hermitian matrices with a positive semidefinite partial transpose.
fn project_ppt(m: &ComplexMatrix, dims: &[usize]) -> Result<ComplexMatrix> {
    let pt = partial_transpose_parties(m, dims, &[1])?;
    let clipped = hermitian_eig_unchecked(&pt).reconstruct_with(|x| x.max(0.0));
    partial_transpose_parties(&clipped, dims, &[1])
}

/// Hilbert-Schmidt projection of a bipartite state onto the PPT states by
/// Dykstra's alternating projections. For two qubits (and qubit-qutrit) the
/// result is the closest separable state.
pub fn closest_ppt_hs(rho: &DensityMatrix, tol: f64, max_iter: usize) -> Result<DensityMatrix> {
    if rho.dims().len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "PPT projection needs a bipartite state, got dims {:?}",
            rho.dims()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let dims = rho.dims();
    let n = rho.side();
    let mut x = rho.matrix().clone();
    let mut p = ComplexMatrix::zeros(n, n);
    let mut q = ComplexMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let y = project_ppt(&(&x + &p), dims)?;
        p = &(&x + &p) - &y;
        let next = project_states(&(&y + &q));
        q = &(&y + &q) - &next;
        let step = next.max_abs_diff(&x);
        x = next;
        let pt = partial_transpose_parties(&x, dims, &[1])?;
        let pt_min = hermitian_eig_unchecked(&pt).eigenvalues[0];
        residual = step.max(-pt_min);
        if step < tol && pt_min >= -tol {
            return DensityMatrix::new(x.hermitian_part(), dims.to_vec());
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_distance, is_psd};
    use crate::states;

    #[test]
    fn pt_eigenvalues_of_reference_states() {
        let bell = states::max_entangled(2).unwrap();
        assert!((ppt_min_eigenvalue(&bell, &[1]).unwrap() + 0.5).abs() < 1e-12);
        let iso = states::isotropic(2, 1.0 / 3.0).unwrap();
        assert!(ppt_min_eigenvalue(&iso, &[0]).unwrap().abs() < 1e-12);
        let h = states::horodecki_3x3(1.0).unwrap();
        assert!(ppt_min_eigenvalue(&h, &[1]).unwrap() >= -1e-12);
        assert!(ppt_min_eigenvalue(&bell, &[]).is_err());
        assert!(ppt_min_eigenvalue(&bell, &[0, 1]).is_err());
        assert!(ppt_min_eigenvalue(&bell, &[2]).is_err());
    }

    #[test]
    fn ansatz_on_bell_saturates_the_bound() {
        let bell = states::max_entangled(2).unwrap();
        let r = css_ansatz_two_qubit(&bell).unwrap();
        assert!(r.valid);
        assert!((r.pt_min_eigenvalue + 0.5).abs() < 1e-12);
        assert!((r.trace_distance - 0.5).abs() < 1e-12);
        assert!(r.bound_holds);
        let pt = partial_transpose_parties(&r.candidate, &[2, 2], &[1]).unwrap();
        let spectrum = hermitian_eig_unchecked(&pt).eigenvalues;
        let expected = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        assert!(spectrum.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), "{spectrum:?}");
    }

    #[test]
    fn ansatz_rejects_ppt_and_wrong_shape() {
        let sep = states::isotropic(2, 0.2).unwrap();
        assert!(css_ansatz_two_qubit(&sep).is_err());
        assert!(css_ansatz_two_qubit(&states::isotropic(3, 1.0).unwrap()).is_err());
    }

    #[test]
    fn dykstra_fixes_separable_states() {
        let sep = states::isotropic(2, 0.2).unwrap();
        let out = closest_ppt_hs(&sep, 1e-8, 50_000).unwrap();
        assert!(hs_distance(&sep, &out).unwrap() < 1e-8);
    }

    #[test]
    fn dykstra_matches_the_bell_value() {
        let bell = states::max_entangled(2).unwrap();
        let out = closest_ppt_hs(&bell, 1e-8, 50_000).unwrap();
        let d = hs_distance(&bell, &out).unwrap();
        assert!((d - 1.0 / 3f64.sqrt()).abs() < 1e-4, "{d}");
    }

    #[test]
    fn dykstra_outputs_are_ppt_states() {
        for seed in 0..100 {
            let rho = states::random_two_qubit(seed).unwrap();
            let out = closest_ppt_hs(&rho, 1e-8, 50_000).unwrap();
            assert!(ppt_min_eigenvalue(&out, &[1]).unwrap() >= -1e-8, "seed {seed}");
            assert!(is_psd(out.matrix(), 1e-9).unwrap());
            if ppt_min_eigenvalue(&rho, &[1]).unwrap() >= 0.0 {
                assert!(hs_distance(&rho, &out).unwrap() < 1e-7, "seed {seed}");
            }
        }
    }

    #[test]
    fn dykstra_needs_bipartite_input() {
        let ghz = states::ghz(3).unwrap();
        assert!(closest_ppt_hs(&ghz, 1e-8, 10).is_err());
        let bell = states::max_entangled(2).unwrap();
        assert!(matches!(closest_ppt_hs(&bell, 1e-8, 1), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn state_projection_is_idempotent() {
        let m = ComplexMatrix::from_diagonal(&[0.7, 0.5, -0.1, -0.1]);
        let p = project_states(&m);
        assert!((p.trace().re - 1.0).abs() < 1e-12);
        assert!(p.max_abs_diff(&project_states(&p)) < 1e-12);
        assert!(p.max_abs_diff(&ComplexMatrix::from_diagonal(&[0.6, 0.4, 0.0, 0.0])) < 1e-12);
    }
}
