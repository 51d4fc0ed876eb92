use serde::Serialize;

use crate::analysis::fit::line_fit;
use crate::curve::SurvivalCurve;
use crate::error::{Error, Result};

/// Relative half-width of the band around the plateau slope.
pub const PLATEAU_BAND: f64 = 0.10;
/// Consecutive in-band points required before the slope counts as settled.
pub const SETTLE_POINTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossover {
    pub time: f64,
    pub plateau_slope: f64,
    pub window: (f64, f64),
}

/// Intermediate fit window [2N, min(10N, 0.1/(2γ_min))].
pub fn default_intermediate_window(n: usize, gamma_min: f64) -> (f64, f64) {
    let lo = 2.0 * n as f64;
    let hi = if gamma_min > 0.0 {
        (10.0 * n as f64).min(0.1 / (2.0 * gamma_min))
    } else {
        10.0 * n as f64
    };
    (lo, hi)
}

/// Local log-log slope at each point from a least-squares line through the
/// five-point stencil centred on it. The two points at each end are NaN.
pub fn running_slope(c: &SurvivalCurve) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![f64::NAN; n];
    if n < 5 {
        return out;
    }
    let lt: Vec<f64> = c.times.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = c.values.iter().map(|v| v.ln()).collect();
    for i in 2..n - 2 {
        let (x, y) = (&lt[i - 2..=i + 2], &lv[i - 2..=i + 2]);
        if x.iter().chain(y).all(|v| v.is_finite()) {
            out[i] = line_fit(x, y).slope;
        }
    }
    out
}

/// Crossover time using the window of [`default_intermediate_window`].
pub fn detect_crossover(c: &SurvivalCurve, n: usize, gamma_min: f64) -> Result<Crossover> {
    let (lo, hi) = default_intermediate_window(n, gamma_min);
    detect_crossover_in(c, lo, hi)
}

/// Earliest time at which the running slope enters the band around the
/// median plateau slope of [lo, hi] and stays there for
/// [`SETTLE_POINTS`] consecutive points.
pub fn detect_crossover_in(c: &SurvivalCurve, lo: f64, hi: f64) -> Result<Crossover> {
    if !(lo < hi) {
        return Err(Error::InvalidWindow(format!("plateau window [{lo}, {hi}]")));
    }
    let slopes = running_slope(c);
    let mut plateau: Vec<f64> = c
        .times
        .iter()
        .zip(&slopes)
        .filter(|(t, s)| **t >= lo && **t <= hi && s.is_finite())
        .map(|(_, s)| *s)
        .collect();
    if plateau.len() < 3 {
        return Err(Error::InvalidWindow(format!(
            "{} usable slopes in plateau window [{lo}, {hi}]",
            plateau.len()
        )));
    }
    plateau.sort_by(f64::total_cmp);
    let m = plateau.len();
    let median = if m % 2 == 1 {
        plateau[m / 2]
    } else {
        0.5 * (plateau[m / 2 - 1] + plateau[m / 2])
    };
    let in_band: Vec<bool> = slopes
        .iter()
        .map(|s| s.is_finite() && (s - median).abs() <= PLATEAU_BAND * median.abs())
        .collect();

    let first = in_band
        .windows(SETTLE_POINTS)
        .position(|w| w.iter().all(|&b| b))
        .ok_or_else(|| Error::NoCrossover(format!("slope never settles near {median:.4}")))?;
    if first <= 2 {
        return Err(Error::NoCrossover(format!(
            "slope already within band of {median:.4} at the first stencil point; extend the grid to earlier times"
        )));
    }
    Ok(Crossover {
        time: c.times[first],
        plateau_slope: median,
        window: (lo, hi),
    })
}
