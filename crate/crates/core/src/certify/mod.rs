//! From numerics to statements: PPT diagnostics, the two-qubit ansatz,
//! the alternating-projection PPT oracle, separability-ball certificates
//! and threshold fits.

mod ball;
mod ppt;
mod threshold;

pub use ball::{
    certify_lower_bound, default_eps_prime_grid, derive_certificate, log_grid, purity_bound,
    qubit_full_sep_purity_bound, supports_derivation, CertificateResult, Notion, Verdict, IDENTITY_TOL,
};
pub use ppt::{closest_ppt_hs, css_ansatz_two_qubit, ppt_min_eigenvalue, AnsatzResult};
pub use threshold::{
    certified_lower_bound, estimate_threshold, ThresholdEstimate, ThresholdMethod, DEFAULT_FIT_WINDOW,
    DEFAULT_FLAT_TOL,
};

/// Default noise margin added to the target before training the separable state.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Dykstra stopping tolerance and iteration cap.
pub const DYKSTRA_TOL: f64 = 1e-8;
pub const DYKSTRA_MAX_ITER: usize = 50_000;
