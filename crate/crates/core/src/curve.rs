//! Time grids and survival curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DiagonalMode, HamiltonianSpec};

/// Values below this magnitude are flushed to zero and flagged.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Linear,
    Logarithmic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub kind: GridKind,
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn linear(t_min: f64, t_max: f64, n_points: usize) -> Result<Self> {
        let g = TimeGrid { kind: GridKind::Linear, t_min, t_max, n_points };
        g.validate()?;
        Ok(g)
    }

    pub fn logarithmic(t_min: f64, t_max: f64, n_points: usize) -> Result<Self> {
        let g = TimeGrid { kind: GridKind::Logarithmic, t_min, t_max, n_points };
        g.validate()?;
        Ok(g)
    }

    /// 200 log-spaced points over [0.1, 10/(2γ_min)].
    pub fn default_for(gamma_min: f64) -> Result<Self> {
        let t_max = if gamma_min > 0.0 { 10.0 / (2.0 * gamma_min) } else { 1e3 };
        TimeGrid::logarithmic(0.1, t_max.max(1.0), 200)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if self.t_min < 0.0 {
            return Err(Error::InvalidGrid(format!("t_min = {} < 0", self.t_min)));
        }
        if !(self.t_min < self.t_max) {
            return Err(Error::InvalidGrid(format!(
                "t_min = {} must be below t_max = {}",
                self.t_min, self.t_max
            )));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidGrid("need at least 2 points".into()));
        }
        if self.kind == GridKind::Logarithmic && self.t_min <= 0.0 {
            return Err(Error::InvalidGrid("logarithmic grid needs t_min > 0".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        let mut pts: Vec<f64> = match self.kind {
            GridKind::Linear => (0..self.n_points)
                .map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / last)
                .collect(),
            GridKind::Logarithmic => {
                let (a, b) = (self.t_min.ln(), self.t_max.ln());
                (0..self.n_points)
                    .map(|i| (a + (b - a) * i as f64 / last).exp())
                    .collect()
            }
        };
        pts[0] = self.t_min;
        pts[self.n_points - 1] = self.t_max;
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveModel {
    QuantumExact,
    QuantumLongtime,
    QuantumPowerlawModel,
    ClassicalExact,
    Oracle,
}

impl CurveModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveModel::QuantumExact => "quantum_exact",
            CurveModel::QuantumLongtime => "quantum_longtime",
            CurveModel::QuantumPowerlawModel => "quantum_powerlaw_model",
            CurveModel::ClassicalExact => "classical_exact",
            CurveModel::Oracle => "oracle",
        }
    }
}

/// Provenance of a curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub traps: Vec<usize>,
    pub diagonal: Option<DiagonalMode>,
    /// Smallest quantum decay rate of the generating spectrum, when known.
    pub gamma_min: Option<f64>,
    pub underflow_clamped: bool,
    pub note: Option<String>,
}

impl CurveMeta {
    pub fn from_spec(spec: &HamiltonianSpec) -> Self {
        CurveMeta {
            n: Some(spec.n),
            gamma: Some(spec.gamma),
            traps: spec.traps.indices().to_vec(),
            diagonal: Some(spec.diagonal),
            ..CurveMeta::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub model: CurveModel,
    pub meta: CurveMeta,
}

impl SurvivalCurve {
    /// Build a curve, flushing sub-[`UNDERFLOW_FLOOR`] values to zero.
    pub fn new(times: Vec<f64>, mut values: Vec<f64>, model: CurveModel, mut meta: CurveMeta) -> Self {
        debug_assert_eq!(times.len(), values.len());
        for v in values.iter_mut() {
            if v.abs() < UNDERFLOW_FLOOR && *v != 0.0 {
                *v = 0.0;
                meta.underflow_clamped = true;
            }
        }
        SurvivalCurve { times, values, model, meta }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Points with t in [lo, hi].
    pub fn window(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.points().filter(|&(t, _)| t >= lo && t <= hi).unzip()
    }

    /// Interpolate log(value) linearly in log(t). `None` outside the grid or
    /// where the bracketing values are not positive.
    pub fn interpolate_log(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if !(t >= first && t <= last) || t <= 0.0 {
            return None;
        }
        let i = self.times.partition_point(|&x| x < t);
        if i < self.times.len() && self.times[i] == t {
            return Some(self.values[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if v0 <= 0.0 || v1 <= 0.0 || t0 <= 0.0 {
            return None;
        }
        let w = (t.ln() - t0.ln()) / (t1.ln() - t0.ln());
        Some((v0.ln() + w * (v1.ln() - v0.ln())).exp())
    }
}
