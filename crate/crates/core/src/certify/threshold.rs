//! Threshold estimates from distance scans.

use std::fmt;

use super::ball::CertificateResult;
use crate::error::{Error, Result};

pub const DEFAULT_FLAT_TOL: f64 = 5e-3;
pub const DEFAULT_FIT_WINDOW: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMethod {
    LinearFit,
    CertifiedLowerBound,
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMethod::LinearFit => "linear-fit",
            ThresholdMethod::CertifiedLowerBound => "certified-lower-bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEstimate {
    pub q_star: f64,
    pub slope: f64,
    pub intercept: f64,
    /// The `(q, distance)` pairs the estimate rests on.
    pub points: Vec<(f64, f64)>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub method: ThresholdMethod,
}

/// Fits a line through the `fit_window` smallest-`q` points whose distance
/// exceeds `flat_tol` and returns its root `q* = -intercept / slope`.
pub fn estimate_threshold(points: &[(f64, f64)], flat_tol: f64, fit_window: usize) -> Result<ThresholdEstimate> {
    if points.iter().any(|(q, d)| !q.is_finite() || !d.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sel: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, d)| d > flat_tol).collect();
    sel.sort_by(|a, b| a.0.total_cmp(&b.0));
    sel.truncate(fit_window);
    if sel.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "{} points above the flat region, need at least 2",
            sel.len()
        )));
    }
    let n = sel.len() as f64;
    let mq = sel.iter().map(|p| p.0).sum::<f64>() / n;
    let md = sel.iter().map(|p| p.1).sum::<f64>() / n;
    let sqq: f64 = sel.iter().map(|p| (p.0 - mq).powi(2)).sum();
    let sqd: f64 = sel.iter().map(|p| (p.0 - mq) * (p.1 - md)).sum();
    if sqq == 0.0 {
        return Err(Error::InvalidParameter("fit points share one q value".into()));
    }
    let slope = sqd / sqq;
    let intercept = md - slope * mq;
    if slope == 0.0 {
        return Err(Error::InvalidParameter("fitted line is flat".into()));
    }
    let q_star = -intercept / slope;
    let residual = (sel.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum::<f64>() / n).sqrt();

    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(lo..=hi).contains(&q_star) {
        return Err(Error::InvalidParameter(format!(
            "fitted threshold {q_star} lies outside the scanned range [{lo}, {hi}]"
        )));
    }
    Ok(ThresholdEstimate {
        q_star,
        slope,
        intercept,
        points: sel,
        residual,
        method: ThresholdMethod::LinearFit,
    })
}

/// The largest certified `q` among `results`, if any.
pub fn certified_lower_bound(results: &[CertificateResult]) -> Option<ThresholdEstimate> {
    let best = results
        .iter()
        .filter(|c| c.certified())
        .max_by(|a, b| a.q.total_cmp(&b.q))?;
    Some(ThresholdEstimate {
        q_star: best.q,
        slope: 0.0,
        intercept: 0.0,
        points: vec![(best.q, best.best_purity)],
        residual: 0.0,
        method: ThresholdMethod::CertifiedLowerBound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_hinge_recovers_the_kink() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| i as f64 / 10.0).map(|q| (q, (q - 0.5f64).max(0.0))).collect();
        let e = estimate_threshold(&pts, DEFAULT_FLAT_TOL, DEFAULT_FIT_WINDOW).unwrap();
        assert!((e.q_star - 0.5).abs() < 1e-12);
        assert_eq!(e.points.len(), 4);
        assert_eq!(e.points[0].0, 0.6);
        assert!(e.residual < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let pts = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.2)];
        assert!(estimate_threshold(&pts, DEFAULT_FLAT_TOL, 4).is_err());
    }

    #[test]
    fn root_outside_the_scan_is_rejected() {
        let pts = [(0.6, 0.7), (0.7, 0.8), (0.8, 0.9)];
        assert!(estimate_threshold(&pts, DEFAULT_FLAT_TOL, 4).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_hinge(t in 0.1f64..0.6, slope in 0.2f64..3.0) {
            let pts: Vec<(f64, f64)> = (0..=20).map(|i| i as f64 / 20.0)
                .map(|q| (q, slope * (q - t).max(0.0))).collect();
            prop_assume!(pts.iter().filter(|p| p.1 > DEFAULT_FLAT_TOL).count() >= 2);
            let e = estimate_threshold(&pts, DEFAULT_FLAT_TOL, DEFAULT_FIT_WINDOW).unwrap();
            prop_assert!((e.q_star - t).abs() < 1e-9);
        }
    }
}
