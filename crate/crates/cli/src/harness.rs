//! q-grid scans and certification sweeps.

use std::io::Write;

use sepnn::certify::{
    certify_lower_bound, derive_certificate, estimate_threshold, supports_derivation, CertificateResult, Notion,
    ThresholdEstimate,
};
use sepnn::error::{Error, Result};
use sepnn::model::SeparabilityStructure;
use sepnn::optim::{train, TrainConfig, TrainResult};
use sepnn::states::{known_threshold, Family, FamilySpec};

use crate::output::{self, meta, opt, Meta};
use crate::pool::map_ordered;

/// Seeds of different grid points are spaced apart so restarts never collide.
pub const SEED_STRIDE: u64 = 1000;

pub fn point_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64 * SEED_STRIDE)
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty q grid".into()));
    }
    if grid.iter().any(|q| !q.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("q grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Largest admissible `q` for a family.
pub fn q_max(family: Family) -> f64 {
    match family {
        Family::Horodecki3x3 => 2.5,
        _ => 1.0,
    }
}

/// 11 evenly spaced points over the family's range plus the exact boundary where known.
pub fn default_grid(family: Family, d: usize) -> Vec<f64> {
    let hi = q_max(family);
    let mut g: Vec<f64> = (0..=10).map(|i| hi * i as f64 / 10.0).collect();
    if let Ok(t) = known_threshold(family, d) {
        g.push(t);
    }
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

pub fn parse_structure(descriptor: &str, dims: Vec<usize>) -> Result<SeparabilityStructure> {
    SeparabilityStructure::parse(descriptor, dims)
}

/// One training run (with the configured restarts) on `family` at `q`.
pub fn train_point(family: &FamilySpec, structure: &str, config: &TrainConfig, q: f64) -> Result<TrainResult> {
    let spec = family.with_q(q);
    let target = spec.build()?;
    let s = parse_structure(structure, spec.dims())?;
    train(&target, &s, config)
}

#[derive(Clone, Debug)]
pub struct ScanSpec {
    pub family: FamilySpec,
    pub structure: String,
    pub config: TrainConfig,
    pub grid: Vec<f64>,
    pub workers: usize,
    pub flat_tol: f64,
    pub fit_window: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub q: f64,
    /// NaN when the point failed.
    pub best_distance: f64,
    /// Stop reason, or `error: ...`.
    pub status: String,
    /// Seed to replay the point with `restarts = 1`.
    pub seed: u64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    pub estimate: std::result::Result<ThresholdEstimate, String>,
}

impl ScanOutcome {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.best_distance.is_finite())
            .map(|r| (r.q, r.best_distance))
            .collect()
    }
}

pub fn run_scan(spec: &ScanSpec) -> Result<ScanOutcome> {
    validate_grid(&spec.grid)?;
    spec.config.validate()?;
    parse_structure(&spec.structure, spec.family.dims())?;
    let rows = map_ordered(spec.workers, &spec.grid, |i, &q| {
        let config = TrainConfig {
            seed: point_seed(spec.config.seed, i),
            ..spec.config.clone()
        };
        match train_point(&spec.family, &spec.structure, &config, q) {
            Ok(r) => ScanRow {
                q,
                best_distance: r.distance,
                status: r.stop.to_string(),
                seed: r.seed,
                wall_time: r.wall_time.as_secs_f64(),
            },
            Err(e) => ScanRow {
                q,
                best_distance: f64::NAN,
                status: format!("error: {e}"),
                seed: config.seed,
                wall_time: 0.0,
            },
        }
    });
    let mut outcome = ScanOutcome {
        rows,
        estimate: Err(String::new()),
    };
    outcome.estimate = estimate_threshold(&outcome.points(), spec.flat_tol, spec.fit_window).map_err(|e| e.to_string());
    Ok(outcome)
}

pub fn scan_meta(spec: &ScanSpec) -> Meta {
    let mut m = meta(&[
        ("command", &"scan"),
        ("family", &spec.family.family),
        ("dim", &spec.family.dim),
        ("structure", &spec.structure),
        ("flat_tol", &spec.flat_tol),
        ("fit_window", &spec.fit_window),
        ("workers", &spec.workers),
    ]);
    m.extend(output::train_meta(&spec.config));
    m
}

pub fn write_scan(w: &mut impl Write, spec: &ScanSpec, outcome: &ScanOutcome) -> std::io::Result<()> {
    output::write_header(w, &scan_meta(spec), &["q", "best_distance", "status", "seed", "wall_time"])?;
    for r in &outcome.rows {
        output::write_row(
            w,
            &[
                r.q.to_string(),
                r.best_distance.to_string(),
                r.status.clone(),
                r.seed.to_string(),
                format!("{:.3}", r.wall_time),
            ],
        )?;
    }
    match &outcome.estimate {
        Ok(e) => {
            writeln!(w, "# threshold: {}", e.q_star)?;
            writeln!(w, "# fit: slope {} intercept {} residual {} points {}", e.slope, e.intercept, e.residual, e.points.len())?;
        }
        Err(msg) => writeln!(w, "# threshold: unavailable ({msg})")?,
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CertifySpec {
    pub family: FamilySpec,
    pub notion: Notion,
    pub epsilon: f64,
    pub eps_prime_grid: Vec<f64>,
    pub config: TrainConfig,
    pub grid: Vec<f64>,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    /// Aligned with the grid.
    pub results: Vec<std::result::Result<CertificateResult, String>>,
    /// Largest certified q.
    pub lower_bound: Option<f64>,
}

/// Certifies every grid point. Points below a certified one that failed on
/// their own are certified by the derived path when the family allows it.
pub fn run_certify(spec: &CertifySpec) -> Result<CertifyOutcome> {
    validate_grid(&spec.grid)?;
    spec.config.validate()?;
    if spec.eps_prime_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps' grid".into()));
    }
    let mut results = map_ordered(spec.workers, &spec.grid, |i, &q| {
        let config = TrainConfig {
            seed: point_seed(spec.config.seed, i),
            ..spec.config.clone()
        };
        certify_lower_bound(&spec.family.with_q(q), spec.notion, spec.epsilon, &spec.eps_prime_grid, &config)
            .map_err(|e| e.to_string())
    });
    if supports_derivation(spec.family.family) {
        let top = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .filter(|c| c.certified())
            .max_by(|a, b| a.q.total_cmp(&b.q))
            .cloned();
        if let Some(top) = top {
            for (r, &q) in results.iter_mut().zip(&spec.grid) {
                let certified = matches!(r, Ok(c) if c.certified());
                if q < top.q && !certified {
                    *r = derive_certificate(&top, &spec.family, q).map_err(|e| e.to_string());
                }
            }
        }
    }
    let lower_bound = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|c| c.certified())
        .map(|c| c.q)
        .fold(None, |m: Option<f64>, q| Some(m.map_or(q, |m| m.max(q))));
    Ok(CertifyOutcome { results, lower_bound })
}

pub fn write_certify(w: &mut impl Write, spec: &CertifySpec, outcome: &CertifyOutcome) -> std::io::Result<()> {
    let grid: Vec<String> = spec.eps_prime_grid.iter().map(|x| x.to_string()).collect();
    let mut m = meta(&[
        ("command", &"certify"),
        ("family", &spec.family.family),
        ("dim", &spec.family.dim),
        ("notion", &spec.notion),
        ("epsilon", &spec.epsilon),
        ("eps_prime_grid", &grid.join(" ")),
        ("workers", &spec.workers),
    ]);
    m.extend(output::train_meta(&spec.config));
    output::write_header(
        w,
        &m,
        &[
            "q",
            "verdict",
            "eps_prime",
            "best_purity",
            "purity_bound",
            "rho_x_psd",
            "css_distance",
            "css_tolerance",
            "identity_residual",
            "derived_from",
            "error",
        ],
    )?;
    for (r, q) in outcome.results.iter().zip(&spec.grid) {
        let fields = match r {
            Ok(c) => vec![
                c.q.to_string(),
                c.verdict.to_string(),
                opt(c.eps_prime),
                c.best_purity.to_string(),
                c.purity_bound.to_string(),
                c.rho_x_psd.to_string(),
                c.css_distance.to_string(),
                c.css_tolerance.to_string(),
                c.identity_residual.to_string(),
                opt(c.derived_from),
                String::new(),
            ],
            Err(e) => {
                let mut v = vec![q.to_string(), "error".into()];
                v.extend(std::iter::repeat(String::new()).take(8));
                v.push(e.replace(',', ";"));
                v
            }
        };
        output::write_row(w, &fields)?;
    }
    writeln!(w, "# lower_bound: {}", opt(outcome.lower_bound))
}
