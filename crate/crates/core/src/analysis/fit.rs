use serde::{Deserialize, Serialize};

use crate::curve::SurvivalCurve;
use crate::error::{Error, Result};
use crate::spectral::{SortOrder, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least-squares line y = slope·x + intercept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    LineFit {
        slope,
        intercept,
        r_squared: r_squared(y, x.iter().map(|a| slope * a + intercept)),
    }
}

fn r_squared(y: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(predicted).map(|(b, p)| (b - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    }
}

/// Unweighted least squares of y = a·x^μ in linear space (Levenberg-Marquardt
/// on (ln a, μ), started from the log-log line). Returns (a, μ, R²).
pub fn power_law_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let start = line_fit(&lx, &ly);
    let (mut ln_a, mut mu) = (start.intercept, start.slope);

    let cost = |ln_a: f64, mu: f64| -> f64 {
        lx.iter()
            .zip(y)
            .map(|(l, v)| ((ln_a + mu * l).exp() - v).powi(2))
            .sum()
    };
    let mut current = cost(ln_a, mu);
    let mut damping = 1e-3;
    for _ in 0..500 {
        // Normal equations J^T J δ = J^T r with J = [f, f·ln x].
        let (mut j11, mut j12, mut j22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (l, v) in lx.iter().zip(y) {
            let f = (ln_a + mu * l).exp();
            let r = v - f;
            let (d1, d2) = (f, f * l);
            j11 += d1 * d1;
            j12 += d1 * d2;
            j22 += d2 * d2;
            g1 += d1 * r;
            g2 += d2 * r;
        }
        let mut improved = false;
        while damping < 1e12 {
            let (a11, a22) = (j11 * (1.0 + damping), j22 * (1.0 + damping));
            let det = a11 * a22 - j12 * j12;
            let d_ln_a = (a22 * g1 - j12 * g2) / det;
            let d_mu = (a11 * g2 - j12 * g1) / det;
            let trial = cost(ln_a + d_ln_a, mu + d_mu);
            if trial.is_finite() && trial <= current {
                ln_a += d_ln_a;
                mu += d_mu;
                let converged = (current - trial) <= 1e-15 * current
                    || (d_mu.abs() < 1e-15 * mu.abs().max(1.0) && d_ln_a.abs() < 1e-15);
                current = trial;
                damping = (damping / 10.0).max(1e-12);
                improved = !converged;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let a = ln_a.exp();
    let r2 = r_squared(y, x.iter().map(|v| a * v.powf(mu)));
    (a, mu, r2)
}

/// Fit γ_l ≈ a·l^μ over 1-based ranks `l_lo..=l_hi` of a spectrum sorted by
/// ascending γ.
pub fn fit_spectral_exponent(s: &Spectrum, l_lo: usize, l_hi: usize) -> Result<FitResult> {
    if s.sort_order() != SortOrder::ByGammaAscending {
        return Err(Error::Validation("spectrum must be sorted by ascending gamma".into()));
    }
    if l_lo < 1 || l_hi > s.len() || l_hi < l_lo + 2 {
        return Err(Error::InvalidWindow(format!(
            "ranks {l_lo}..={l_hi} invalid for {} eigenvalues (need at least 3)",
            s.len()
        )));
    }
    let gammas = s.gammas();
    let ranks: Vec<f64> = (l_lo..=l_hi).map(|l| l as f64).collect();
    let values: Vec<f64> = gammas[l_lo - 1..l_hi].to_vec();
    if let Some(bad) = values.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::InvalidWindow(format!(
            "gamma at rank {} is not positive ({:e})",
            l_lo + bad,
            values[bad]
        )));
    }
    let (a, mu, r2) = power_law_fit(&ranks, &values);
    Ok(FitResult {
        exponent: mu,
        prefactor: a,
        window: (l_lo as f64, l_hi as f64),
        r_squared: r2,
        n_points: ranks.len(),
    })
}

fn positive_window(c: &SurvivalCurve, t_lo: f64, t_hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t_lo < t_hi) {
        return Err(Error::InvalidWindow(format!("[{t_lo}, {t_hi}]")));
    }
    let (t, v) = c.window(t_lo, t_hi);
    if t.len() < 3 {
        return Err(Error::InvalidWindow(format!(
            "only {} grid points in [{t_lo}, {t_hi}]",
            t.len()
        )));
    }
    if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidWindow(format!(
            "non-positive value {:e} at t = {}",
            v[i], t[i]
        )));
    }
    if t[0] <= 0.0 {
        return Err(Error::InvalidWindow("window includes t = 0".into()));
    }
    Ok((t, v))
}

/// Log-log slope of the curve over [t_lo, t_hi]; `exponent` is the slope.
pub fn fit_decay_exponent(c: &SurvivalCurve, t_lo: f64, t_hi: f64) -> Result<FitResult> {
    let (t, v) = positive_window(c, t_lo, t_hi)?;
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let fit = line_fit(&lt, &lv);
    Ok(FitResult {
        exponent: fit.slope,
        prefactor: fit.intercept.exp(),
        window: (t_lo, t_hi),
        r_squared: fit.r_squared,
        n_points: t.len(),
    })
}

/// Exponential rate of the curve over [t_lo, t_hi]; `exponent` is the
/// (positive) decay rate.
pub fn fit_exponential_tail(c: &SurvivalCurve, t_lo: f64, t_hi: f64) -> Result<FitResult> {
    let (t, v) = positive_window(c, t_lo, t_hi)?;
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let fit = line_fit(&t, &lv);
    Ok(FitResult {
        exponent: -fit.slope,
        prefactor: fit.intercept.exp(),
        window: (t_lo, t_hi),
        r_squared: fit.r_squared,
        n_points: t.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CurveMeta, CurveModel, TimeGrid};
    use crate::graph::C64;
    use crate::quantum::powerlaw_model;

    #[test]
    fn synthetic_square_law() {
        let values: Vec<C64> = (1..=40).map(|l| C64::new(0.0, -3.0 * (l * l) as f64)).collect();
        let s = Spectrum::diagonal(&values).sort_by_decay();
        let fit = fit_spectral_exponent(&s, 4, 30).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-12 * 3.0);
        assert_eq!(fit.n_points, 27);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_nonlinear_optimum() {
        // Noisy data: the linear-space optimum differs from the log-log line
        // and must zero the gradient of the linear-space cost.
        let x: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| 0.5 * v.powf(1.7) * (1.0 + 0.05 * ((i * 7 % 5) as f64 - 2.0)))
            .collect();
        let (a, mu, _) = power_law_fit(&x, &y);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (xi, yi) in x.iter().zip(&y) {
            let f = a * xi.powf(mu);
            g1 += (yi - f) * f;
            g2 += (yi - f) * f * xi.ln();
        }
        let scale: f64 = y.iter().map(|v| v * v).sum();
        assert!(g1.abs() < 1e-9 * scale && g2.abs() < 1e-9 * scale, "{g1} {g2}");
    }

    #[test]
    fn spectral_fit_errors() {
        let values: Vec<C64> = (0..10).map(|l| C64::new(0.0, -(l as f64))).collect();
        let unsorted = Spectrum::diagonal(&values);
        assert!(fit_spectral_exponent(&unsorted, 2, 8).is_err());
        let s = unsorted.sort_by_decay();
        assert!(matches!(fit_spectral_exponent(&s, 1, 5), Err(Error::InvalidWindow(_))));
        assert!(matches!(fit_spectral_exponent(&s, 3, 4), Err(Error::InvalidWindow(_))));
        assert!(matches!(fit_spectral_exponent(&s, 3, 11), Err(Error::InvalidWindow(_))));
    }

    #[test]
    fn decay_exponent_of_pure_power_law() {
        let grid = TimeGrid::logarithmic(1.0, 1e4, 81).unwrap();
        let c = powerlaw_model(0.2, 2.0, &grid).unwrap();
        let fit = fit_decay_exponent(&c, 10.0, 1000.0).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail_of_pure_exponential() {
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let values = times.iter().map(|t| 0.3 * (-0.07 * t).exp()).collect();
        let c = SurvivalCurve::new(times, values, CurveModel::Oracle, CurveMeta::default());
        let fit = fit_exponential_tail(&c, 5.0, 40.0).unwrap();
        assert!((fit.exponent - 0.07).abs() < 1e-13);
        assert!((fit.prefactor - 0.3).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let c = SurvivalCurve::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.0, 0.5, 0.0, 0.1],
            CurveModel::Oracle,
            CurveMeta::default(),
        );
        assert!(matches!(fit_decay_exponent(&c, 1.0, 4.0), Err(Error::InvalidWindow(_))));
        assert!(matches!(fit_exponential_tail(&c, 3.0, 1.0), Err(Error::InvalidWindow(_))));
        assert!(matches!(fit_decay_exponent(&c, 1.0, 1.5), Err(Error::InvalidWindow(_))));
    }
}
