//! Adadelta training of a decomposition model against a target state.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use super::loss::LossTracker;
use crate::error::{Error, Result};
use crate::linalg::{hs_distance, trace_distance, DensityMatrix};
use crate::model::{DecompositionModel, SeparabilityStructure, Workspace, DEFAULT_WIDTH};
use crate::states::LossKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdadeltaConfig {
    pub decay: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            decay: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adadelta {
    config: AdadeltaConfig,
    sq_grad: Vec<f64>,
    sq_step: Vec<f64>,
}

impl Adadelta {
    pub fn new(config: AdadeltaConfig, len: usize) -> Self {
        Self {
            config,
            sq_grad: vec![0.0; len],
            sq_step: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdadeltaConfig { decay, eps, lr } = self.config;
        for (((x, &g), eg), ed) in params.iter_mut().zip(grad).zip(&mut self.sq_grad).zip(&mut self.sq_step) {
            *eg = decay * *eg + (1.0 - decay) * g * g;
            let dx = ((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
            *ed = decay * *ed + (1.0 - decay) * dx * dx;
            *x -= lr * dx;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// Decomposition size; `None` means the product of the local dimensions.
    pub k: Option<usize>,
    pub width: usize,
    pub max_epochs: usize,
    pub batches_per_epoch: usize,
    /// Stop once the best distance falls below this: the target is deemed separable.
    pub separable_tol: f64,
    /// Stop once the best distance improves by less than this over one epoch.
    pub converge_tol: f64,
    /// Consecutive stalled epochs needed before stopping as converged.
    pub patience: usize,
    pub adadelta: AdadeltaConfig,
    pub seed: u64,
    /// Independent runs with seeds `seed, seed + 1, ...`; the best is kept.
    /// Runs stop early once one reaches the separable threshold.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Trace,
            k: None,
            width: DEFAULT_WIDTH,
            max_epochs: 10,
            batches_per_epoch: 3000,
            separable_tol: 2e-3,
            converge_tol: 2e-4,
            patience: 1,
            adadelta: AdadeltaConfig::default(),
            seed: 0,
            restarts: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.batches_per_epoch == 0 {
            return bad("batches per epoch must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be at least 1");
        }
        if self.restarts == 0 || self.patience == 0 {
            return bad("restarts and patience must be at least 1");
        }
        if !(self.separable_tol > 0.0 && self.converge_tol > 0.0) {
            return bad("stopping thresholds must be positive");
        }
        if !(self.adadelta.decay > 0.0 && self.adadelta.decay < 1.0 && self.adadelta.eps > 0.0 && self.adadelta.lr > 0.0)
        {
            return bad("Adadelta needs decay in (0,1) and positive eps and learning rate");
        }
        if self.width == 0 || self.k == Some(0) {
            return bad("K and width must be at least 1");
        }
        Ok(())
    }

    /// The K used for a structure: the configured value or the product of
    /// local dimensions, capped at the Caratheodory bound.
    pub fn resolved_k(&self, structure: &SeparabilityStructure) -> Result<usize> {
        let n = structure.total_dim();
        let k = self.k.unwrap_or(n);
        if k > n * n {
            return Err(Error::InvalidParameter(format!("K = {k} exceeds the bound {}", n * n)));
        }
        Ok(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Distance fell below the separable threshold.
    Separable,
    /// Best distance changed by less than the convergence threshold in one epoch.
    Converged,
    /// Ran out of epochs.
    Exhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Separable => "separable",
            StopReason::Converged => "converged",
            StopReason::Exhausted => "exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub best_distance: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    /// Distance of the returned state to the target, recomputed from scratch.
    pub distance: f64,
    pub loss: LossKind,
    pub stop: StopReason,
    pub epochs: usize,
    pub batches: usize,
    pub wall_time: Duration,
    /// Seed of the run that produced the result.
    pub seed: u64,
    /// Model holding the best parameters seen.
    pub model: DecompositionModel,
    pub state: DensityMatrix,
    pub history: Vec<EpochRecord>,
}

/// Distance between two states under `loss`.
pub fn distance(loss: LossKind, a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    match loss {
        LossKind::Trace => trace_distance(a, b),
        LossKind::HilbertSchmidt => hs_distance(a, b),
    }
}

/// Trains a fresh model for every restart and returns the best run.
pub fn train(target: &DensityMatrix, structure: &SeparabilityStructure, config: &TrainConfig) -> Result<TrainResult> {
    train_logged(target, structure, config, None)
}

/// As [`train`], writing one CSV record per epoch to `log`.
pub fn train_logged(
    target: &DensityMatrix,
    structure: &SeparabilityStructure,
    config: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainResult> {
    config.validate()?;
    if target.dims() != structure.dims() {
        return Err(Error::DimensionMismatch(format!(
            "target dims {:?} vs structure dims {:?}",
            target.dims(),
            structure.dims()
        )));
    }
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "restart,seed,epoch,best_distance,wall_seconds")?;
    }
    let mut best: Option<TrainResult> = None;
    for r in 0..config.restarts {
        let seed = config.seed.wrapping_add(r as u64);
        let run = train_single(target, structure, config, seed)?;
        if let Some(w) = log.as_deref_mut() {
            for e in &run.history {
                writeln!(w, "{r},{seed},{},{:e},{:.3}", e.epoch, e.best_distance, e.wall_seconds)?;
            }
        }
        let separable = run.stop == StopReason::Separable;
        if best.as_ref().map_or(true, |b| run.distance < b.distance) {
            best = Some(run);
        }
        if separable {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

fn train_single(
    target: &DensityMatrix,
    structure: &SeparabilityStructure,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainResult> {
    let start = Instant::now();
    let k = config.resolved_k(structure)?;
    let mut model = DecompositionModel::with_width(structure.clone(), k, config.width, seed)?;
    let mut params = model.params().to_vec();
    let mut best_params = params.clone();
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new(&model);
    let mut tracker = LossTracker::new(config.loss);
    let mut opt = Adadelta::new(config.adadelta, params.len());

    let mut best = f64::INFINITY;
    let mut history = Vec::new();
    let mut batches = 0;
    let mut stop = StopReason::Exhausted;
    let mut epoch_start_best = f64::INFINITY;
    let mut stalled = 0;

    'epochs: for epoch in 1..=config.max_epochs {
        for _ in 0..config.batches_per_epoch {
            ws.evaluate(&model, &params)?;
            let (value, g) = tracker.evaluate(&ws.rho, target.matrix())?;
            if !value.is_finite() {
                return Err(Error::NanLoss { batch: batches });
            }
            if epoch == 1 && batches == 0 {
                epoch_start_best = value;
            }
            if value < best {
                best = value;
                best_params.copy_from_slice(&params);
            }
            if best < config.separable_tol {
                stop = StopReason::Separable;
                history.push(EpochRecord {
                    epoch,
                    best_distance: best,
                    wall_seconds: start.elapsed().as_secs_f64(),
                });
                break 'epochs;
            }
            ws.backward(&model, &params, &g, &mut grad)?;
            if grad.iter().any(|x| !x.is_finite()) {
                return Err(Error::NanLoss { batch: batches });
            }
            opt.step(&mut params, &grad);
            batches += 1;
        }
        history.push(EpochRecord {
            epoch,
            best_distance: best,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if (epoch_start_best - best).abs() < config.converge_tol {
            stalled += 1;
            if stalled >= config.patience {
                stop = StopReason::Converged;
                break;
            }
        } else {
            stalled = 0;
        }
        epoch_start_best = best;
    }

    model.set_params(&best_params);
    let state = model.assemble()?.state;
    let distance = distance(config.loss, target, &state)?;
    Ok(TrainResult {
        distance,
        loss: config.loss,
        stop,
        epochs: history.len(),
        batches,
        wall_time: start.elapsed(),
        seed,
        model,
        state,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{self, reference_distance, Family};

    fn quick(loss: LossKind, epochs: usize, batches: usize) -> TrainConfig {
        TrainConfig {
            loss,
            max_epochs: epochs,
            batches_per_epoch: batches,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn two_qubit() -> SeparabilityStructure {
        SeparabilityStructure::full_sep(vec![2, 2]).unwrap()
    }

    #[test]
    fn adadelta_minimises_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adadelta::new(AdadeltaConfig::default(), 2);
        for _ in 0..20000 {
            let g = vec![2.0 * x[0], 4.0 * x[1]];
            opt.step(&mut x, &g);
        }
        assert!(x[0].abs() < 0.1 && x[1].abs() < 0.1, "{x:?}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let target = states::isotropic(2, 0.5).unwrap();
        let mut c = quick(LossKind::Trace, 1, 1);
        c.batches_per_epoch = 0;
        assert!(train(&target, &two_qubit(), &c).is_err());
        let c = quick(LossKind::Trace, 1, 1);
        let wrong = SeparabilityStructure::full_sep(vec![3, 3]).unwrap();
        assert!(matches!(train(&target, &wrong, &c), Err(Error::DimensionMismatch(_))));
        let mut c = quick(LossKind::Trace, 1, 1);
        c.k = Some(17);
        assert!(train(&target, &two_qubit(), &c).is_err());
    }

    #[test]
    fn result_is_a_sound_upper_bound_and_deterministic() {
        let target = states::werner(2, 0.8).unwrap();
        for loss in [LossKind::Trace, LossKind::HilbertSchmidt] {
            let c = quick(loss, 2, 300);
            let a = train(&target, &two_qubit(), &c).unwrap();
            let b = train(&target, &two_qubit(), &c).unwrap();
            assert_eq!(a.distance.to_bits(), b.distance.to_bits());
            let recomputed = distance(loss, &target, &a.model.assemble().unwrap().state).unwrap();
            assert!((recomputed - a.distance).abs() < 1e-10);
            assert!(a.distance + 1e-9 >= reference_distance(Family::Werner, 2, 0.8, loss).unwrap());
            assert!(a.history.windows(2).all(|w| w[1].best_distance <= w[0].best_distance));
        }
    }

    #[test]
    fn bell_reaches_one_half() {
        let target = states::isotropic(2, 1.0).unwrap();
        let r = train(&target, &two_qubit(), &quick(LossKind::Trace, 10, 3000)).unwrap();
        assert!((r.distance - 0.5).abs() < 2e-3, "{}", r.distance);
    }

    #[test]
    fn werner_trace_value() {
        let target = states::werner(2, 1.0).unwrap();
        let r = train(&target, &two_qubit(), &quick(LossKind::Trace, 10, 3000)).unwrap();
        assert!((r.distance - 0.5).abs() < 5e-3, "{}", r.distance);
    }

    #[test]
    fn isotropic_three_is_near_zero_only_below_its_threshold() {
        let s = SeparabilityStructure::full_sep(vec![3, 3]).unwrap();
        let c = quick(LossKind::Trace, 10, 3000);
        let at = train(&states::isotropic(3, 0.25).unwrap(), &s, &c).unwrap();
        assert!(at.distance < 1e-2, "{}", at.distance);
        let above = train(&states::isotropic(3, 1.0 / 3.0).unwrap(), &s, &c).unwrap();
        assert_ne!(above.stop, StopReason::Separable);
        let expected = reference_distance(Family::Isotropic, 3, 1.0 / 3.0, LossKind::Trace).unwrap();
        assert!(above.distance + 1e-9 >= expected);
        assert!(above.distance > 5.0 * at.distance);
    }

    #[test]
    fn patience_delays_convergence() {
        let target = states::werner(2, 0.3).unwrap();
        let mut c = quick(LossKind::Trace, 6, 200);
        c.separable_tol = 1e-12;
        c.converge_tol = 1.0;
        assert_eq!(train(&target, &two_qubit(), &c).unwrap().epochs, 1);
        c.patience = 3;
        assert_eq!(train(&target, &two_qubit(), &c).unwrap().epochs, 3);
    }

    #[test]
    fn log_has_one_row_per_epoch() {
        let target = states::werner(2, 0.9).unwrap();
        let mut buf = Vec::new();
        let r = train_logged(&target, &two_qubit(), &quick(LossKind::Trace, 3, 50), Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + r.history.len());
    }
}
