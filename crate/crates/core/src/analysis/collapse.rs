use serde::Serialize;

use crate::analysis::crossover::default_intermediate_window;
use crate::curve::{CurveMeta, SurvivalCurve};
use crate::error::{Error, Result};

/// Points on the common rescaled-time grid used for the dispersion.
pub const COLLAPSE_POINTS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    /// (N, curve against τ = t / N^(3-μ)), in input order.
    pub curves: Vec<(usize, SurvivalCurve)>,
    pub mu_used: f64,
    /// max over τ of (max - min) / mean across curves.
    pub dispersion: f64,
    /// Common intermediate window in τ.
    pub window: (f64, f64),
}

pub fn rescale_exponent(mu: f64) -> f64 {
    3.0 - mu
}

/// Rescale each curve to τ = t / N^(3-μ) and measure the spread on the
/// overlap of their intermediate windows. Curves carry N (and γ_min, when
/// known) in their metadata.
pub fn collapse_curves(curves: &[SurvivalCurve], mu: f64) -> Result<CollapseReport> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Validation("collapse needs at least one curve".into()))?;
    let mut seen = Vec::with_capacity(curves.len());
    for c in curves {
        let n = c
            .meta
            .n
            .ok_or_else(|| Error::Validation("curve metadata lacks N".into()))?;
        if seen.contains(&n) {
            return Err(Error::Validation(format!("duplicate N = {n}")));
        }
        if c.model != first.model || c.meta.gamma != first.meta.gamma {
            return Err(Error::Validation("curves differ in model or gamma".into()));
        }
        seen.push(n);
    }

    let p = rescale_exponent(mu);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut rescaled = Vec::with_capacity(curves.len());
    for c in curves {
        let n = c.meta.n.unwrap_or_default();
        let scale = (n as f64).powf(p);
        let (w_lo, w_hi) = default_intermediate_window(n, c.meta.gamma_min.unwrap_or(0.0));
        lo = lo.max(w_lo / scale);
        hi = hi.min(w_hi / scale);
        let times: Vec<f64> = c.times.iter().map(|t| t / scale).collect();
        lo = lo.max(times[0]);
        hi = hi.min(*times.last().unwrap_or(&0.0));
        let meta = CurveMeta {
            note: Some(format!("time rescaled by N^(3 - {mu})")),
            ..c.meta.clone()
        };
        rescaled.push((n, SurvivalCurve::new(times, c.values.clone(), c.model, meta)));
    }
    if !(lo < hi) {
        return Err(Error::NoOverlap(format!(
            "common rescaled window [{lo:.4e}, {hi:.4e}] is empty"
        )));
    }

    let mut dispersion = 0.0f64;
    if rescaled.len() > 1 {
        let (a, b) = (lo.ln(), hi.ln());
        for i in 0..COLLAPSE_POINTS {
            let tau = (a + (b - a) * i as f64 / (COLLAPSE_POINTS - 1) as f64).exp();
            let tau = tau.clamp(lo, hi);
            let vals = rescaled
                .iter()
                .map(|(n, c)| {
                    c.interpolate_log(tau).ok_or_else(|| {
                        Error::NoOverlap(format!("curve N = {n} is not positive at tau = {tau:e}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            dispersion = dispersion.max((max - min) / mean);
        }
    }
    Ok(CollapseReport { curves: rescaled, mu_used: mu, dispersion, window: (lo, hi) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CurveModel, TimeGrid};

    /// Π = f(t / N^p) for a fixed shape f.
    fn scaled_family(ns: &[usize], p: f64) -> Vec<SurvivalCurve> {
        ns.iter()
            .map(|&n| {
                let times = TimeGrid::logarithmic(0.1, 1e6, 300).unwrap().points();
                let values = times
                    .iter()
                    .map(|t| (1.0 + t / (n as f64).powf(p)).powf(-0.5))
                    .collect();
                let meta = CurveMeta { n: Some(n), gamma: Some(1.0), ..CurveMeta::default() };
                SurvivalCurve::new(times, values, CurveModel::QuantumExact, meta)
            })
            .collect()
    }

    #[test]
    fn exact_scaling_collapses() {
        let family = scaled_family(&[40, 60, 80], 1.2);
        let good = collapse_curves(&family, 1.8).unwrap();
        assert!(good.dispersion < 1e-3, "{}", good.dispersion);
        let bad = collapse_curves(&family, 0.5).unwrap();
        assert!(bad.dispersion > 10.0 * good.dispersion);
    }

    #[test]
    fn single_curve_has_zero_dispersion() {
        let family = scaled_family(&[50], 1.0);
        let r = collapse_curves(&family, 2.0).unwrap();
        assert_eq!(r.dispersion, 0.0);
        assert_eq!(r.curves.len(), 1);
    }

    #[test]
    fn order_does_not_matter() {
        let mut family = scaled_family(&[40, 60, 80, 100], 1.1);
        let a = collapse_curves(&family, 1.865).unwrap().dispersion;
        family.reverse();
        let b = collapse_curves(&family, 1.865).unwrap().dispersion;
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_families() {
        let mut family = scaled_family(&[40, 40], 1.0);
        assert!(collapse_curves(&family, 1.8).is_err());
        family[1].meta.n = None;
        assert!(collapse_curves(&family, 1.8).is_err());
        assert!(collapse_curves(&[], 1.8).is_err());
        // Far-apart sizes whose intermediate windows cannot overlap.
        let family = scaled_family(&[10, 10_000], 1.0);
        assert!(matches!(collapse_curves(&family, 3.0), Err(Error::NoOverlap(_))));
    }
}
