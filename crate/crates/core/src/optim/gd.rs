//! Plain gradient descent over a directly parametrised separable state, the
//! baseline the network is compared against.
//!
//! Parameters are `K` weight logits (softmax) and, per index, one raw
//! amplitude vector per party (normalised by its 2-norm). Updates use heavy-ball
//! momentum with a geometrically decaying step.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::loss::loss_gradient_wrt_state;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};
use crate::model::{mixture_backward, mixture_forward, MixtureCache, MixtureLayout, SeparabilityStructure};
use crate::states::{rng_from_seed, LossKind};

#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub rounds: usize,
    pub lr: f64,
    pub decay: f64,
    pub momentum: f64,
    pub real_only: bool,
    pub k: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            rounds: 250,
            lr: 1.0,
            decay: 0.98,
            momentum: 0.2,
            real_only: false,
            k: 16,
            loss: LossKind::Trace,
            seed: 0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidParameter("decay must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must lie in [0, 1)".into()));
        }
        if self.k == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidParameter("K and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Distance after initialisation followed by the distance after each round
/// (`rounds + 1` values).
pub fn naive_gd(target: &DensityMatrix, config: &GdConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let structure = SeparabilityStructure::full_sep(target.dims().to_vec())?;
    let layout = MixtureLayout::new(&structure);
    let k = config.k;
    let mut rng = rng_from_seed(config.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut logits: Vec<f64> = (0..k).map(|_| normal()).collect();
    let mut amps: Vec<Complex64> = (0..k * layout.amps_per_index())
        .map(|_| {
            let re = normal();
            let im = if config.real_only { 0.0 } else { normal() };
            Complex64::new(re, im)
        })
        .collect();
    let mut v_logits = vec![0.0; logits.len()];
    let mut v_amps = vec![Complex64::new(0.0, 0.0); amps.len()];

    let n = layout.total_dim();
    let mut cache = MixtureCache::default();
    let mut rho = ComplexMatrix::zeros(n, n);
    let (mut d_logits, mut d_amps) = (Vec::new(), Vec::new());
    let mut curve = Vec::with_capacity(config.rounds + 1);
    let mut lr = config.lr;

    for round in 0..=config.rounds {
        mixture_forward(&layout, &logits, &amps, &mut cache, &mut rho)?;
        let (value, g) = loss_gradient_wrt_state(&rho, target.matrix(), config.loss)?;
        if !value.is_finite() {
            return Err(Error::NanLoss { batch: round });
        }
        curve.push(value);
        if round == config.rounds {
            break;
        }
        mixture_backward(&layout, &cache, &g, &mut d_logits, &mut d_amps)?;
        for ((x, v), d) in logits.iter_mut().zip(&mut v_logits).zip(&d_logits) {
            *v = config.momentum * *v - lr * d;
            *x += *v;
        }
        for ((x, v), d) in amps.iter_mut().zip(&mut v_amps).zip(&d_amps) {
            let d = if config.real_only { Complex64::new(d.re, 0.0) } else { *d };
            *v = *v * config.momentum - d * lr;
            *x += *v;
        }
        lr *= config.decay;
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;

    #[test]
    fn zero_rounds_returns_initial_distance() {
        let bell = states::isotropic(2, 1.0).unwrap();
        let c = GdConfig {
            rounds: 0,
            ..GdConfig::default()
        };
        let curve = naive_gd(&bell, &c).unwrap();
        assert_eq!(curve.len(), 1);
        assert!(curve[0] >= 0.5 - 1e-12);
    }

    #[test]
    fn curves_are_upper_bounds_and_deterministic() {
        let bell = states::isotropic(2, 1.0).unwrap();
        for real_only in [false, true] {
            let c = GdConfig {
                real_only,
                seed: 4,
                ..GdConfig::default()
            };
            let a = naive_gd(&bell, &c).unwrap();
            assert_eq!(a.len(), 251);
            assert!(a.iter().all(|&d| d >= 0.5 - 1e-9));
            assert_eq!(a, naive_gd(&bell, &c).unwrap());
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bell = states::isotropic(2, 1.0).unwrap();
        let c = GdConfig {
            momentum: 1.0,
            ..GdConfig::default()
        };
        assert!(naive_gd(&bell, &c).is_err());
    }
}
