//! Random-state benchmark, gradient-descent baseline and ansatz checks.

use std::io::Write;

use num_complex::Complex64;
use sepnn::certify::{closest_ppt_hs, css_ansatz_two_qubit, ppt_min_eigenvalue};
use sepnn::error::Result;
use sepnn::linalg::{hs_distance, trace_distance, DensityMatrix};
use sepnn::model::SeparabilityStructure;
use sepnn::optim::{naive_gd, train, GdConfig, TrainConfig};
use sepnn::states;

use crate::harness::point_seed;
use crate::output::{self, meta, opt};
use crate::pool::map_ordered;

#[derive(Clone, Debug)]
pub struct RandomBenchSpec {
    pub count: usize,
    /// State `i` uses seed `state_seed + i`.
    pub state_seed: u64,
    pub config: TrainConfig,
    pub workers: usize,
    pub dykstra_tol: f64,
    pub dykstra_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomRow {
    pub state_seed: u64,
    pub train_seed: u64,
    pub min_pt_eigenvalue: f64,
    pub trained_distance: f64,
    /// Trace distance of the ansatz state, when the state is NPT and the ansatz valid.
    pub ansatz_distance: Option<f64>,
    pub ansatz_valid: Option<bool>,
    pub ppt_hs_distance: f64,
}

pub fn random_bench(spec: &RandomBenchSpec) -> Result<Vec<RandomRow>> {
    spec.config.validate()?;
    let idx: Vec<usize> = (0..spec.count).collect();
    let structure = SeparabilityStructure::full_sep(vec![2, 2])?;
    map_ordered(spec.workers, &idx, |i, _| {
        let state_seed = spec.state_seed.wrapping_add(i as u64);
        let rho = states::random_two_qubit(state_seed)?;
        let lambda = ppt_min_eigenvalue(&rho, &[1])?;
        let config = TrainConfig {
            seed: point_seed(spec.config.seed, i),
            ..spec.config.clone()
        };
        let trained = train(&rho, &structure, &config)?;
        let (ansatz_distance, ansatz_valid) = if lambda < 0.0 {
            let a = css_ansatz_two_qubit(&rho)?;
            (a.valid.then_some(a.trace_distance), Some(a.valid))
        } else {
            (None, None)
        };
        let ppt = closest_ppt_hs(&rho, spec.dykstra_tol, spec.dykstra_max_iter)?;
        Ok(RandomRow {
            state_seed,
            train_seed: trained.seed,
            min_pt_eigenvalue: lambda,
            trained_distance: trained.distance,
            ansatz_distance,
            ansatz_valid,
            ppt_hs_distance: hs_distance(&rho, &ppt)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_random_bench(w: &mut impl Write, spec: &RandomBenchSpec, rows: &[RandomRow]) -> std::io::Result<()> {
    let mut m = meta(&[
        ("command", &"random-bench"),
        ("count", &spec.count),
        ("state_seed", &spec.state_seed),
        ("measure", &"Hilbert-Schmidt (Ginibre)"),
        ("dykstra_tol", &spec.dykstra_tol),
        ("dykstra_max_iter", &spec.dykstra_max_iter),
    ]);
    m.extend(output::train_meta(&spec.config));
    output::write_header(
        w,
        &m,
        &[
            "state_seed",
            "train_seed",
            "min_pt_eigenvalue",
            "trained_distance",
            "ansatz_distance",
            "ansatz_valid",
            "ppt_hs_distance",
        ],
    )?;
    for r in rows {
        output::write_row(
            w,
            &[
                r.state_seed.to_string(),
                r.train_seed.to_string(),
                r.min_pt_eigenvalue.to_string(),
                r.trained_distance.to_string(),
                opt(r.ansatz_distance),
                opt(r.ansatz_valid),
                r.ppt_hs_distance.to_string(),
            ],
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GdBenchSpec {
    pub runs: usize,
    pub rounds: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for GdBenchSpec {
    fn default() -> Self {
        Self {
            runs: 20,
            rounds: GdConfig::default().rounds,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdCurve {
    pub target: &'static str,
    pub real_only: bool,
    pub run: usize,
    pub seed: u64,
    pub distances: Vec<f64>,
}

impl GdCurve {
    pub fn final_distance(&self) -> f64 {
        *self.distances.last().expect("non-empty curve")
    }
}

/// Complex and real-only runs on the Bell state and the d = 5 maximally entangled state.
pub fn gd_bench(spec: &GdBenchSpec) -> Result<Vec<GdCurve>> {
    let targets = [("bell", states::isotropic(2, 1.0)?), ("isotropic5", states::isotropic(5, 1.0)?)];
    let mut jobs = Vec::new();
    for (ti, (name, _)) in targets.iter().enumerate() {
        for real_only in [false, true] {
            for run in 0..spec.runs {
                jobs.push((ti, *name, real_only, run));
            }
        }
    }
    map_ordered(spec.workers, &jobs, |_, &(ti, target, real_only, run)| {
        let seed = spec.seed.wrapping_add(run as u64);
        let config = GdConfig {
            rounds: spec.rounds,
            real_only,
            seed,
            ..GdConfig::default()
        };
        Ok(GdCurve {
            target,
            real_only,
            run,
            seed,
            distances: naive_gd(&targets[ti].1, &config)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_gd_bench(w: &mut impl Write, spec: &GdBenchSpec, curves: &[GdCurve]) -> std::io::Result<()> {
    let g = GdConfig::default();
    let m = meta(&[
        ("command", &"gd-bench"),
        ("runs", &spec.runs),
        ("rounds", &spec.rounds),
        ("seed", &spec.seed),
        ("lr", &g.lr),
        ("decay", &g.decay),
        ("momentum", &g.momentum),
        ("k", &g.k),
        ("prng", &states::PRNG_NAME),
    ]);
    output::write_header(w, &m, &["target", "mode", "run", "seed", "round", "distance"])?;
    for c in curves {
        let mode = if c.real_only { "real" } else { "complex" };
        for (round, d) in c.distances.iter().enumerate() {
            output::write_row(
                w,
                &[
                    c.target.into(),
                    mode.into(),
                    c.run.to_string(),
                    c.seed.to_string(),
                    round.to_string(),
                    d.to_string(),
                ],
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzRow {
    pub region: &'static str,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Positive semidefinite.
    pub valid: bool,
    /// Positive partial transpose, hence separable for two qubits.
    pub separable: bool,
    pub distance: Option<f64>,
    /// Valid, separable and at trace distance 1/2 from the Bell state.
    pub ok: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AnsatzReport {
    pub rows: Vec<AnsatzRow>,
    pub random_states: usize,
    pub random_npt: usize,
    pub random_invalid: usize,
    /// Valid ansatz states violating the distance bound.
    pub random_violations: usize,
}

impl AnsatzReport {
    pub fn region_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.valid && !r.ok).count()
    }
}

const HALF_TOL: f64 = 1e-9;

fn ansatz_row(region: &'static str, a: f64, b: f64, c: f64, bell: &DensityMatrix) -> Result<AnsatzRow> {
    let m = states::bell_ansatz_matrix(a, Complex64::new(b, 0.0), Complex64::new(c, 0.0));
    let Ok(rho) = states::bell_ansatz_state(a, Complex64::new(b, 0.0), Complex64::new(c, 0.0)) else {
        return Ok(AnsatzRow {
            region,
            a,
            b,
            c,
            valid: false,
            separable: false,
            distance: None,
            ok: false,
        });
    };
    let separable = ppt_min_eigenvalue(&rho, &[1])? >= -1e-9;
    let d = trace_distance(&m, bell)?;
    Ok(AnsatzRow {
        region,
        a,
        b,
        c,
        valid: true,
        separable,
        distance: Some(d),
        ok: separable && (d - 0.5).abs() <= HALF_TOL,
    })
}

fn lin(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..=steps).map(move |i| lo + (hi - lo) * i as f64 / steps as f64)
}

/// Sweeps the Bell-ansatz regions on a `steps`-grid per axis and runs the
/// ansatz on `random_count` random two-qubit states.
pub fn ansatz_check(steps: usize, random_count: usize, seed: u64) -> Result<AnsatzReport> {
    let bell = states::max_entangled(2)?;
    let mut report = AnsatzReport::default();
    let steps = steps.max(1);
    for a in lin(0.0, 1.0 / 6.0, steps) {
        for b in lin(0.0, a, steps) {
            report.rows.push(ansatz_row("c0", a, b, 0.0, &bell)?);
        }
    }
    let c_max = (1.0f64 / 72.0).sqrt();
    for c in lin(0.0, c_max, steps) {
        for b in lin(24.0 * c * c - 1.0 / 6.0, 1.0 / 6.0, steps) {
            report.rows.push(ansatz_row("a1/6", 1.0 / 6.0, b, c, &bell)?);
        }
    }
    for a in lin(0.0, 0.25, steps) {
        let r = 0.125f64.powi(2) - (a - 0.125).powi(2);
        let c_hi = r.max(0.0).sqrt();
        for c in lin(0.0, c_hi, steps) {
            report.rows.push(ansatz_row("b=a", a, a, c, &bell)?);
        }
    }
    // A non-positive parameter choice, kept to show it is flagged.
    report.rows.push(ansatz_row("invalid", 0.5, 0.5, 0.3, &bell)?);

    for i in 0..random_count {
        let rho = states::random_two_qubit(seed.wrapping_add(i as u64))?;
        report.random_states += 1;
        if ppt_min_eigenvalue(&rho, &[1])? >= 0.0 {
            continue;
        }
        report.random_npt += 1;
        let r = css_ansatz_two_qubit(&rho)?;
        if !r.valid {
            report.random_invalid += 1;
        } else if !r.bound_holds {
            report.random_violations += 1;
        }
    }
    Ok(report)
}

pub fn write_ansatz_check(w: &mut impl Write, report: &AnsatzReport) -> std::io::Result<()> {
    let m = meta(&[
        ("command", &"ansatz-check"),
        ("random_states", &report.random_states),
        ("random_npt", &report.random_npt),
        ("random_invalid", &report.random_invalid),
        ("random_violations", &report.random_violations),
        ("region_violations", &report.region_violations()),
    ]);
    output::write_header(w, &m, &["region", "a", "b", "c", "valid", "separable", "distance", "ok"])?;
    for r in &report.rows {
        output::write_row(
            w,
            &[
                r.region.into(),
                r.a.to_string(),
                r.b.to_string(),
                r.c.to_string(),
                r.valid.to_string(),
                r.separable.to_string(),
                opt(r.distance),
                r.ok.to_string(),
            ],
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ansatz_regions_are_all_at_one_half() {
        let report = ansatz_check(6, 50, 0).unwrap();
        assert_eq!(report.region_violations(), 0);
        assert!(report.rows.iter().filter(|r| r.region != "invalid").all(|r| r.valid));
        assert!(report.rows.iter().any(|r| r.region == "invalid" && !r.valid));
        assert_eq!(report.random_violations, 0);
    }

    #[test]
    fn gd_bench_smoke() {
        let spec = GdBenchSpec {
            runs: 2,
            rounds: 1,
            ..GdBenchSpec::default()
        };
        let curves = gd_bench(&spec).unwrap();
        assert_eq!(curves.len(), 8);
        assert!(curves.iter().all(|c| c.distances.len() == 2));
    }
}
