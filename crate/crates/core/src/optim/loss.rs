//! Distance losses and their gradients with respect to the assembled state.
//!
//! Gradients follow the convention `dL = Re Tr(G dRho)` for Hermitian `dRho`.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig_unchecked, hermitian_eig_warm, ComplexMatrix, EigenDecomposition};
use crate::states::LossKind;

/// Eigenvalues of the difference below this count as zero in the trace-loss subgradient.
pub const KINK_TOL: f64 = 1e-12;

fn difference(rho_nn: &ComplexMatrix, rho_t: &ComplexMatrix) -> Result<ComplexMatrix> {
    rho_nn.require_square()?;
    rho_nn.require_same_shape(rho_t)?;
    Ok(rho_nn - rho_t)
}

fn trace_from_eig(e: &EigenDecomposition) -> (f64, ComplexMatrix) {
    let value = 0.5 * e.eigenvalues.iter().map(|x| x.abs()).sum::<f64>();
    let grad = e.reconstruct_with(|x| if x.abs() < KINK_TOL { 0.0 } else { 0.5 * x.signum() });
    (value, grad)
}

fn hs_from_difference(delta: ComplexMatrix) -> (f64, ComplexMatrix) {
    let value = delta.frobenius_norm();
    if value < KINK_TOL {
        let n = delta.rows();
        return (value, ComplexMatrix::zeros(n, n));
    }
    (value, delta.scale(1.0 / value))
}

/// Loss value and its gradient with respect to `rho_nn`.
pub fn loss_gradient_wrt_state(
    rho_nn: &ComplexMatrix,
    rho_t: &ComplexMatrix,
    loss: LossKind,
) -> Result<(f64, ComplexMatrix)> {
    let delta = difference(rho_nn, rho_t)?;
    let out = match loss {
        LossKind::Trace => trace_from_eig(&hermitian_eig_unchecked(&delta)),
        LossKind::HilbertSchmidt => hs_from_difference(delta),
    };
    if !out.0.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

/// Repeated loss evaluation along an optimisation path. The trace loss
/// restarts each eigendecomposition from the previous eigenbasis, with a cold
/// decomposition every `refresh` calls to stop rounding drift.
#[derive(Clone, Debug)]
pub struct LossTracker {
    loss: LossKind,
    basis: Option<ComplexMatrix>,
    calls: usize,
    refresh: usize,
}

impl LossTracker {
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            basis: None,
            calls: 0,
            refresh: 200,
        }
    }

    pub fn evaluate(&mut self, rho_nn: &ComplexMatrix, rho_t: &ComplexMatrix) -> Result<(f64, ComplexMatrix)> {
        let delta = difference(rho_nn, rho_t)?;
        let out = match self.loss {
            LossKind::HilbertSchmidt => hs_from_difference(delta),
            LossKind::Trace => {
                let e = match &self.basis {
                    Some(u) if self.calls % self.refresh != 0 => hermitian_eig_warm(&delta, u),
                    _ => hermitian_eig_unchecked(&delta),
                };
                self.calls += 1;
                let out = trace_from_eig(&e);
                self.basis = Some(e.eigenvectors);
                out
            }
        };
        if !out.0.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_distance, trace_distance};
    use crate::states::{self, rng_from_seed};
    use num_complex::Complex64;
    use rand::Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .hermitian_part()
    }

    #[test]
    fn equal_states_give_zero() {
        let rho = states::isotropic(2, 0.4).unwrap().into_matrix();
        for loss in [LossKind::Trace, LossKind::HilbertSchmidt] {
            let (v, g) = loss_gradient_wrt_state(&rho, &rho, loss).unwrap();
            assert_eq!(v, 0.0);
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn bell_against_ansatz_state() {
        let bell = states::max_entangled(2).unwrap().into_matrix();
        let ansatz = states::bell_ansatz_matrix(1.0 / 6.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let (v, _) = loss_gradient_wrt_state(&ansatz, &bell, LossKind::Trace).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = ComplexMatrix::identity(4);
        let b = ComplexMatrix::identity(3);
        assert!(loss_gradient_wrt_state(&a, &b, LossKind::Trace).is_err());
    }

    /// Directional derivatives of both losses against central differences on
    /// random states, skipping differences with an eigenvalue near zero.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(5);
        let mut checked = 0;
        for trial in 0..100u64 {
            let a = states::random_hilbert_schmidt(4, vec![2, 2], 1000 + trial).unwrap().into_matrix();
            let b = states::random_hilbert_schmidt(4, vec![2, 2], 2000 + trial).unwrap().into_matrix();
            let spectrum = hermitian_eig_unchecked(&(&a - &b)).eigenvalues;
            if spectrum.iter().any(|x| x.abs() < 1e-8) {
                continue;
            }
            let h = random_hermitian(4, &mut rng);
            for loss in [LossKind::Trace, LossKind::HilbertSchmidt] {
                let (_, g) = loss_gradient_wrt_state(&a, &b, loss).unwrap();
                let eps = 1e-6;
                let mut plus = a.clone();
                plus.add_scaled(eps, &h);
                let mut minus = a.clone();
                minus.add_scaled(-eps, &h);
                let fd = (loss_gradient_wrt_state(&plus, &b, loss).unwrap().0
                    - loss_gradient_wrt_state(&minus, &b, loss).unwrap().0)
                    / (2.0 * eps);
                let analytic = g.trace_product_re(&h);
                assert!(
                    (fd - analytic).abs() <= 1e-4 * analytic.abs().max(1e-3),
                    "trial {trial} {loss}: fd {fd} analytic {analytic}"
                );
            }
            checked += 1;
        }
        assert!(checked > 90);
    }

    #[test]
    fn values_agree_with_linalg_distances() {
        let a = states::random_two_qubit(1).unwrap();
        let b = states::random_two_qubit(2).unwrap();
        let (t, _) = loss_gradient_wrt_state(a.matrix(), b.matrix(), LossKind::Trace).unwrap();
        let (h, _) = loss_gradient_wrt_state(a.matrix(), b.matrix(), LossKind::HilbertSchmidt).unwrap();
        assert!((t - trace_distance(&a, &b).unwrap()).abs() < 1e-12);
        assert!((h - hs_distance(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tracker_matches_cold_evaluation() {
        let target = states::werner(3, 0.8).unwrap().into_matrix();
        let mut tracker = LossTracker::new(LossKind::Trace);
        let mut rng = rng_from_seed(9);
        let mut rho = states::random_hilbert_schmidt(9, vec![3, 3], 4).unwrap().into_matrix();
        for _ in 0..50 {
            let (v, g) = tracker.evaluate(&rho, &target).unwrap();
            let (v0, g0) = loss_gradient_wrt_state(&rho, &target, LossKind::Trace).unwrap();
            assert!((v - v0).abs() < 1e-12);
            assert!(g.max_abs_diff(&g0) < 1e-9);
            rho.add_scaled(1e-3, &random_hermitian(9, &mut rng));
        }
    }
}
