//! Lower-bound certification through the separability ball around the
//! maximally mixed state.
//!
//! A separable `rho_css` is trained for the slightly noisier state
//! `rho_t = (1 + eps) rho - eps I / D`. For each `eps'` the matrix
//! `rho_x = (1 + eps') rho - eps' rho_css` is tested for membership of the
//! ball (positive semidefinite with purity under the bound). If it passes,
//! `rho = (rho_x + eps' rho_css) / (1 + eps')` is a convex combination of
//! two separable states.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig_unchecked, purity, trace_distance, ComplexMatrix, DensityMatrix, PSD_TOL};
use crate::model::SeparabilityStructure;
use crate::optim::{train, TrainConfig};
use crate::states::{Family, FamilySpec, LossKind};

/// Numerical tolerance on the convex-combination identity.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Notion {
    FullSep,
    Bisep,
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Notion::FullSep => "full",
            Notion::Bisep => "bisep",
        })
    }
}

impl FromStr for Notion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "fullsep" | "full-sep" => Ok(Notion::FullSep),
            "bisep" | "biseparable" => Ok(Notion::Bisep),
            other => Err(Error::Parse(format!("unknown notion {other:?}"))),
        }
    }
}

impl Notion {
    pub fn structure(self, dims: Vec<usize>) -> Result<SeparabilityStructure> {
        match self {
            Notion::FullSep => SeparabilityStructure::full_sep(dims),
            Notion::Bisep => SeparabilityStructure::biseparable(dims),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    NotCertified,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "certified",
            Verdict::NotCertified => "not-certified",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CertificateResult {
    pub notion: Notion,
    pub q: f64,
    pub epsilon: f64,
    pub eps_prime_grid: Vec<f64>,
    /// The `eps'` used for the verdict: the passing value of smallest purity,
    /// or the positive semidefinite candidate of smallest purity otherwise.
    pub eps_prime: Option<f64>,
    /// Smallest purity among positive semidefinite candidates (infinite if none).
    pub best_purity: f64,
    pub purity_bound: f64,
    pub rho_x_psd: bool,
    /// Trace distance of the trained separable state to `rho_t`.
    pub css_distance: f64,
    /// Largest `css_distance` the certificate accepts.
    pub css_tolerance: f64,
    /// Max-abs residual of `rho - (rho_x + eps' rho_css) / (1 + eps')`.
    pub identity_residual: f64,
    pub verdict: Verdict,
    /// Set when the certificate was derived from one at a larger `q`.
    pub derived_from: Option<f64>,
    pub rho_x: Option<ComplexMatrix>,
    pub css_state: DensityMatrix,
}

impl CertificateResult {
    pub fn certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// `1 / (2^N - alpha^2)` with `alpha^2 = 2^N / ((17/2) 3^(N-3) + 1)`, the
/// fully separable ball for `N >= 3` qubits.
pub fn qubit_full_sep_purity_bound(parties: usize) -> f64 {
    let two_n = 2f64.powi(parties as i32);
    let alpha2 = two_n / (8.5 * 3f64.powi(parties as i32 - 3) + 1.0);
    1.0 / (two_n - alpha2)
}

/// Purity bound of the separability ball for `notion` on `dims`.
pub fn purity_bound(notion: Notion, dims: &[usize]) -> Result<f64> {
    let total: usize = dims.iter().product();
    let bipartite_ball = 1.0 / (total as f64 - 1.0);
    match notion {
        Notion::Bisep => Ok(bipartite_ball),
        Notion::FullSep if dims.len() == 2 => Ok(bipartite_ball),
        Notion::FullSep if dims.iter().all(|&d| d == 2) => Ok(qubit_full_sep_purity_bound(dims.len())),
        Notion::FullSep => Err(Error::Unsupported(format!(
            "no full-separability ball for dims {dims:?}"
        ))),
    }
}

/// 40 log-spaced values from 1e-3 to 1e3.
pub fn default_eps_prime_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn min_eig(m: &ComplexMatrix) -> f64 {
    hermitian_eig_unchecked(m).eigenvalues[0]
}

/// `(1 + s) a - s b`.
fn extrapolate(a: &ComplexMatrix, b: &ComplexMatrix, s: f64) -> ComplexMatrix {
    let mut out = a.scale(1.0 + s);
    out.add_scaled(-s, b);
    out
}

/// Attempts to certify that `spec` (at its own `q`) is separable under `notion`.
pub fn certify_lower_bound(
    spec: &FamilySpec,
    notion: Notion,
    epsilon: f64,
    eps_prime_grid: &[f64],
    config: &TrainConfig,
) -> Result<CertificateResult> {
    if eps_prime_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps' grid".into()));
    }
    if !(epsilon > 0.0) || eps_prime_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("eps and eps' must be positive".into()));
    }
    let rho = spec.build()?;
    let dims = rho.dims().to_vec();
    let bound = purity_bound(notion, &dims)?;
    let structure = notion.structure(dims.clone())?;

    let mixed = DensityMatrix::maximally_mixed(dims.clone());
    let t = extrapolate(rho.matrix(), mixed.matrix(), epsilon);
    let lowest = min_eig(&t);
    if lowest < -PSD_TOL {
        return Err(Error::InvalidParameter(format!(
            "rho_t is not a state for eps = {epsilon} (min eigenvalue {lowest:e})"
        )));
    }
    let rho_t = DensityMatrix::new(t, dims.clone())?;
    let config = TrainConfig {
        loss: LossKind::Trace,
        ..config.clone()
    };
    let trained = train(&rho_t, &structure, &config)?;
    let css = trained.state;
    let css_distance = trace_distance(&css, &rho_t)?;
    let css_tolerance = epsilon.max(config.separable_tol);

    // (purity, eps', psd) per grid point.
    let candidates: Vec<(f64, f64, bool)> = eps_prime_grid
        .iter()
        .map(|&ep| {
            let x = extrapolate(rho.matrix(), css.matrix(), ep);
            let psd = min_eig(&x) >= -PSD_TOL;
            (purity(&x).unwrap_or(f64::INFINITY), ep, psd)
        })
        .collect();
    let best_psd = candidates
        .iter()
        .filter(|c| c.2)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .copied();
    let passes = best_psd.is_some_and(|(p, _, _)| p <= bound) && css_distance <= css_tolerance;

    let (eps_prime, rho_x, identity_residual) = match best_psd {
        Some((_, ep, _)) => {
            let x = extrapolate(rho.matrix(), css.matrix(), ep);
            let mut rebuilt = x.clone();
            rebuilt.add_scaled(ep, css.matrix());
            let residual = rebuilt.scale(1.0 / (1.0 + ep)).max_abs_diff(rho.matrix());
            (Some(ep), Some(x), residual)
        }
        None => (None, None, f64::INFINITY),
    };
    let verdict = if passes && identity_residual <= IDENTITY_TOL {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    Ok(CertificateResult {
        notion,
        q: spec.q,
        epsilon,
        eps_prime_grid: eps_prime_grid.to_vec(),
        eps_prime,
        best_purity: best_psd.map_or(f64::INFINITY, |c| c.0),
        purity_bound: bound,
        rho_x_psd: best_psd.is_some(),
        css_distance,
        css_tolerance,
        identity_residual,
        verdict,
        derived_from: None,
        rho_x,
        css_state: css,
    })
}

/// Families of the form `q P + (1 - q) I / D`, for which a certificate at `q1`
/// carries over to every `q2 <= q1`.
pub fn supports_derivation(family: Family) -> bool {
    matches!(family, Family::Isotropic | Family::NoisyGhz | Family::NoisyW)
}

/// Certificate for `q2 <= certificate.q` without retraining.
///
/// With `t = q2 / q1`, `rho(q2) = t rho(q1) + (1 - t) I / D`. Substituting the
/// certified decomposition of `rho(q1)` gives `rho(q2) = (rho_x2 + eps'' rho_css) / (1 + eps'')`
/// where `rho_x2` mixes `rho_x` with `I / D` and so stays inside the ball.
pub fn derive_certificate(certificate: &CertificateResult, spec: &FamilySpec, q2: f64) -> Result<CertificateResult> {
    if !supports_derivation(spec.family) {
        return Err(Error::Unsupported(format!("no derived certificates for {}", spec.family)));
    }
    let (Verdict::Certified, Some(ep), Some(x)) = (certificate.verdict, certificate.eps_prime, &certificate.rho_x)
    else {
        return Err(Error::InvalidParameter("source certificate is not certified".into()));
    };
    let q1 = certificate.q;
    if !(0.0..=q1).contains(&q2) || q1 <= 0.0 {
        return Err(Error::InvalidParameter(format!("need 0 <= q2 <= q1, got q2 = {q2}, q1 = {q1}")));
    }
    let rho = spec.with_q(q2).build()?;
    let dims = rho.dims().to_vec();
    let mixed = DensityMatrix::maximally_mixed(dims);
    let t = q2 / q1;
    let norm = t + (1.0 + ep) * (1.0 - t);
    let mut x2 = x.scale(t / norm);
    x2.add_scaled((1.0 + ep) * (1.0 - t) / norm, mixed.matrix());
    let ep2 = t * ep / norm;

    let css = &certificate.css_state;
    let mut rebuilt = x2.clone();
    rebuilt.add_scaled(ep2, css.matrix());
    let identity_residual = rebuilt.scale(1.0 / (1.0 + ep2)).max_abs_diff(rho.matrix());
    let p = purity(&x2)?;
    let psd = min_eig(&x2) >= -PSD_TOL;
    let verdict = if psd && p <= certificate.purity_bound && identity_residual <= IDENTITY_TOL {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    Ok(CertificateResult {
        q: q2,
        eps_prime: Some(ep2),
        best_purity: p,
        rho_x_psd: psd,
        identity_residual,
        verdict,
        derived_from: Some(q1),
        rho_x: Some(x2),
        ..certificate.clone()
    })
}
