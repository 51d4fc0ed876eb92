//! Spec-to-curve plumbing shared by the analyses and the CLI.

use crate::classical::ClassicalWalk;
use crate::curve::{CurveMeta, SurvivalCurve, TimeGrid};
use crate::error::Result;
use crate::graph::{classical_transfer_matrix, quantum_hamiltonian, DiagonalMode, HamiltonianSpec};
use crate::quantum::QuantumWalk;
use crate::spectral::{decompose, Spectrum};

/// A decomposed quantum system, spectrum sorted by ascending γ.
pub struct QuantumRun {
    pub spec: HamiltonianSpec,
    pub spectrum: Spectrum,
    pub gamma_min: f64,
}

impl QuantumRun {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        spec.validate()?;
        let spectrum = decompose(&quantum_hamiltonian(spec))?.sort_by_decay();
        let gamma_min = spectrum.gamma_min()?;
        Ok(QuantumRun { spec: spec.clone(), spectrum, gamma_min })
    }

    pub fn walk(&self) -> Result<QuantumWalk<'_>> {
        QuantumWalk::new(&self.spectrum, &self.spec.active_traps())
    }

    pub fn default_grid(&self) -> Result<TimeGrid> {
        TimeGrid::default_for(self.gamma_min)
    }

    fn meta(&self) -> CurveMeta {
        CurveMeta {
            gamma_min: Some(self.gamma_min),
            ..CurveMeta::from_spec(&self.spec)
        }
    }

    pub fn mean_survival(&self, grid: &TimeGrid) -> Result<SurvivalCurve> {
        let mut c = self.walk()?.mean_survival(grid)?;
        c.meta = CurveMeta { underflow_clamped: c.meta.underflow_clamped, ..self.meta() };
        Ok(c)
    }

    pub fn mean_survival_longtime(&self, grid: &TimeGrid) -> Result<SurvivalCurve> {
        let mut c = self.walk()?.mean_survival_longtime(grid)?;
        c.meta = CurveMeta { underflow_clamped: c.meta.underflow_clamped, ..self.meta() };
        Ok(c)
    }
}

/// Classical mean survival for the same spec.
pub fn classical_curve(spec: &HamiltonianSpec, grid: &TimeGrid) -> Result<SurvivalCurve> {
    spec.validate()?;
    let walk = ClassicalWalk::new(&classical_transfer_matrix(spec), &spec.active_traps())?;
    let mut c = walk.mean_survival(grid)?;
    let note = (spec.diagonal == DiagonalMode::UniformTwo).then(|| {
        "uniform_two diagonal: columns of T do not sum to zero, probability leaks even without traps"
            .to_string()
    });
    c.meta = CurveMeta {
        underflow_clamped: c.meta.underflow_clamped,
        note,
        ..CurveMeta::from_spec(spec)
    };
    Ok(c)
}
