use serde::Serialize;

use crate::curve::{SurvivalCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{build_chain, DiagonalMode, HamiltonianSpec};
use crate::pipeline::QuantumRun;

/// Trap strengths swept when none are given.
pub const DEFAULT_GAMMAS: [f64; 7] = [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0];
/// Grid density used for each sweep member.
pub const SWEEP_POINTS: usize = 400;

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    /// `None` when the curve never drops below the threshold on its grid.
    pub t_threshold: Option<f64>,
    pub curve: SurvivalCurve,
}

/// First time the curve falls below `threshold`, interpolating log Π
/// linearly in log t between the bracketing grid points. Returns the first
/// grid time if the curve starts below the threshold.
pub fn time_to_threshold(c: &SurvivalCurve, threshold: f64) -> Option<f64> {
    let i = c.values.iter().position(|&v| v < threshold)?;
    if i == 0 {
        return Some(c.times[0]);
    }
    let (t0, t1) = (c.times[i - 1], c.times[i]);
    let (v0, v1) = (c.values[i - 1], c.values[i]);
    if t0 <= 0.0 || v1 <= 0.0 {
        // Linear fallback where logs are undefined.
        return Some(t0 + (t1 - t0) * (v0 - threshold) / (v0 - v1));
    }
    let w = (threshold.ln() - v0.ln()) / (v1.ln() - v0.ln());
    Some((t0.ln() + w * (t1.ln() - t0.ln())).exp())
}

/// Nearest-neighbour chain of `n` sites with traps at both ends, swept over
/// `gammas`.
pub fn gamma_sweep(n: usize, gammas: &[f64], threshold: f64) -> Result<Vec<SweepPoint>> {
    let base = build_chain(n, 1.0, DiagonalMode::default())?;
    gamma_sweep_spec(&base, gammas, threshold, None)
}

/// Sweep Γ over copies of `base`. Each member gets its own default grid
/// (400 log points up to 10/(2γ_min)) unless `grid` is given.
pub fn gamma_sweep_spec(
    base: &HamiltonianSpec,
    gammas: &[f64],
    threshold: f64,
    grid: Option<TimeGrid>,
) -> Result<Vec<SweepPoint>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Validation(format!("threshold {threshold} must lie in (0, 1)")));
    }
    if let Some(&g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::Validation(format!("sweep gamma {g} must be positive")));
    }
    exec::try_map(gammas, |&gamma| {
        let spec = HamiltonianSpec { gamma, ..base.clone() };
        let run = QuantumRun::new(&spec)?;
        let grid = match grid {
            Some(g) => g,
            None => {
                let d = run.default_grid()?;
                TimeGrid::logarithmic(d.t_min, d.t_max, SWEEP_POINTS)?
            }
        };
        let curve = run.mean_survival(&grid)?;
        Ok(SweepPoint { gamma, t_threshold: time_to_threshold(&curve, threshold), curve })
    })
}

/// Sweep member reaching the threshold first, if any does.
pub fn fastest(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.t_threshold.is_some())
        .min_by(|a, b| a.t_threshold.partial_cmp(&b.t_threshold).unwrap())
}
