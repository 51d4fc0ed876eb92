//! CTRW counterpart: master-equation dynamics p(t) = e^{Tt} p(0) under the
//! symmetric transfer matrix T = T0 - ΓP.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::curve::{CurveMeta, CurveModel, SurvivalCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::TrapSet;
use crate::quantum::rk4_trajectory;

/// Orthonormal eigendecomposition of a symmetric generator, with trap
/// weights precomputed for the mean survival.
pub struct ClassicalWalk {
    rates: Vec<f64>,
    vectors: DMatrix<f64>,
    traps: TrapSet,
    non_traps: Vec<usize>,
    /// (Σ_{k∉M} U_kl)² per mode.
    survival_weights: Vec<f64>,
}

fn check_node(j: usize, n: usize) -> Result<usize> {
    if j == 0 || j > n {
        Err(Error::NodeOutOfRange { index: j, n })
    } else {
        Ok(j - 1)
    }
}

impl ClassicalWalk {
    pub fn new(t: &DMatrix<f64>, traps: &TrapSet) -> Result<Self> {
        let n = t.nrows();
        if n == 0 || t.ncols() != n {
            return Err(Error::InvalidSize(format!("{}x{} generator", t.nrows(), t.ncols())));
        }
        let asym = (t - t.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::Validation(format!(
                "transfer matrix must be symmetric (max |T - T^T| = {asym:e})"
            )));
        }
        if let Some(&m) = traps.indices().last() {
            check_node(m, n)?;
        }
        if traps.len() >= n {
            return Err(Error::InvalidConfiguration(format!(
                "{} traps cover all {n} nodes; survival is undefined",
                traps.len()
            )));
        }
        let eig = SymmetricEigen::new(t.clone());
        let non_traps = traps.complement(n);
        let survival_weights = eig
            .eigenvectors
            .column_iter()
            .map(|u| non_traps.iter().map(|&k| u[k]).sum::<f64>().powi(2))
            .collect();
        Ok(ClassicalWalk {
            rates: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
            traps: traps.clone(),
            non_traps,
            survival_weights,
        })
    }

    /// Eigenvalues of T (all ≤ 0 for Γ ≥ 0).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.rates
    }

    /// |largest eigenvalue of T|, the asymptotic decay rate.
    pub fn slowest_rate(&self) -> f64 {
        -self.rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// p_kj(t) = ⟨k|e^{Tt}|j⟩.
    pub fn transition(&self, k: usize, j: usize, t: f64) -> Result<f64> {
        let n = self.rates.len();
        let (k, j) = (check_node(k, n)?, check_node(j, n)?);
        Ok(self
            .rates
            .iter()
            .enumerate()
            .map(|(l, &lam)| self.vectors[(k, l)] * (lam * t).exp() * self.vectors[(j, l)])
            .sum())
    }

    /// P_M(t) = (N-M)⁻¹ Σ_{j,k∉M} p_kj(t).
    pub fn mean_survival_at(&self, t: f64) -> f64 {
        let s: f64 = self
            .rates
            .iter()
            .zip(&self.survival_weights)
            .map(|(&lam, &w)| w * (lam * t).exp())
            .sum();
        s / self.non_traps.len() as f64
    }

    pub fn mean_survival(&self, grid: &TimeGrid) -> Result<SurvivalCurve> {
        grid.validate()?;
        let times = grid.points();
        let values = exec::map(&times, |&t| self.mean_survival_at(t));
        Ok(SurvivalCurve::new(
            times,
            values,
            CurveModel::ClassicalExact,
            CurveMeta {
                n: Some(self.rates.len()),
                traps: self.traps.indices().to_vec(),
                ..CurveMeta::default()
            },
        ))
    }
}

pub fn classical_transition(t_matrix: &DMatrix<f64>, k: usize, j: usize, t: f64) -> Result<f64> {
    ClassicalWalk::new(t_matrix, &TrapSet::empty())?.transition(k, j, t)
}

pub fn classical_mean_survival(
    t_matrix: &DMatrix<f64>,
    traps: &TrapSet,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    ClassicalWalk::new(t_matrix, traps)?.mean_survival(grid)
}

/// RK4 integration of dp/dt = Tp from p(0) = |start⟩, reporting Σ_{k∉M} p_k(t).
pub fn master_equation_oracle(
    t_matrix: &DMatrix<f64>,
    start: usize,
    traps: &TrapSet,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    if let Some(&m) = traps.indices().last() {
        check_node(m, t_matrix.nrows())?;
    }
    let non_traps = traps.complement(t_matrix.nrows());
    let (times, values) = rk4_trajectory(
        t_matrix,
        start,
        grid,
        |t, p, out| out.gemv(1.0, t, p, 0.0),
        |p| non_traps.iter().map(|&k| p[k]).sum(),
    )?;
    Ok(SurvivalCurve::new(
        times,
        values,
        CurveModel::Oracle,
        CurveMeta {
            n: Some(t_matrix.nrows()),
            traps: traps.indices().to_vec(),
            note: Some(format!("rk4 classical, start node {start}")),
            ..CurveMeta::default()
        },
    ))
}

/// Full distribution p(t) from the same RK4 scheme, for positivity and
/// relaxation checks.
pub fn master_equation_distribution(
    t_matrix: &DMatrix<f64>,
    start: usize,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    let (_, states) = rk4_trajectory(
        t_matrix,
        start,
        grid,
        |t, p, out| out.gemv(1.0, t, p, 0.0),
        |p| p.iter().copied().collect(),
    )?;
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_chain, classical_transfer_matrix, DiagonalMode};

    fn chain(n: usize, gamma: f64, mode: DiagonalMode) -> (DMatrix<f64>, TrapSet) {
        let spec = build_chain(n, gamma, mode).unwrap();
        (classical_transfer_matrix(&spec), spec.traps)
    }

    #[test]
    fn identity_at_zero() {
        let (t, _) = chain(6, 1.0, DiagonalMode::VertexDegree);
        for k in 1..=6 {
            for j in 1..=6 {
                let p = classical_transition(&t, k, j, 0.0).unwrap();
                assert!((p - if k == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_trap_node_rate() {
        let gamma = 0.8;
        let t = DMatrix::from_element(1, 1, -gamma);
        for time in [0.5, 2.0, 7.0] {
            let p = classical_transition(&t, 1, 1, time).unwrap();
            assert!((p - (-gamma * time).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn conservation_without_traps() {
        let (t, _) = chain(9, 0.0, DiagonalMode::VertexDegree);
        let walk = ClassicalWalk::new(&t, &TrapSet::empty()).unwrap();
        for time in [0.1, 3.0, 100.0] {
            for j in 1..=9 {
                let col: f64 = (1..=9).map(|k| walk.transition(k, j, time).unwrap()).sum();
                assert!((col - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bounds_symmetry_and_monotonicity() {
        let (t, _) = chain(12, 1.5, DiagonalMode::UniformTwo);
        let walk = ClassicalWalk::new(&t, &TrapSet::empty()).unwrap();
        let times = [0.0, 0.5, 2.0, 10.0, 50.0];
        for j in 1..=12 {
            let mut prev_col = f64::INFINITY;
            for &time in &times {
                let mut col = 0.0;
                for k in 1..=12 {
                    let p = walk.transition(k, j, time).unwrap();
                    assert!((-1e-14..=1.0 + 1e-14).contains(&p));
                    assert!((p - walk.transition(j, k, time).unwrap()).abs() < 1e-13);
                    col += p;
                }
                assert!(col <= 1.0 + 1e-10);
                assert!(col <= prev_col + 1e-12);
                prev_col = col;
            }
        }
    }

    #[test]
    fn slowest_rate_governs_tail() {
        let (t, traps) = chain(50, 1.0, DiagonalMode::VertexDegree);
        let walk = ClassicalWalk::new(&t, &traps).unwrap();
        let rate = walk.slowest_rate();
        let (t1, t2) = (20.0 / rate, 30.0 / rate);
        let fitted = (walk.mean_survival_at(t1) / walk.mean_survival_at(t2)).ln() / (t2 - t1);
        assert!((fitted - rate).abs() < 1e-6 * rate);
    }

    #[test]
    fn oracle_matches_spectral() {
        let (t, traps) = chain(10, 1.0, DiagonalMode::VertexDegree);
        let walk = ClassicalWalk::new(&t, &traps).unwrap();
        let grid = TimeGrid::logarithmic(0.1, 100.0, 30).unwrap();
        for start in [2, 4] {
            let c = master_equation_oracle(&t, start, &traps, &grid).unwrap();
            for (time, v) in c.points() {
                let spectral: f64 = (2..=9).map(|k| walk.transition(k, start, time).unwrap()).sum();
                assert!((v - spectral).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn oracle_stays_non_negative() {
        let (t, _) = chain(10, 1.0, DiagonalMode::VertexDegree);
        let grid = TimeGrid::linear(0.0, 30.0, 31).unwrap();
        let dist = master_equation_distribution(&t, 3, &grid).unwrap();
        assert!(dist.iter().flatten().all(|&p| p >= -1e-12));
    }

    #[test]
    fn relaxes_monotonically_to_uniform() {
        let (t, _) = chain(5, 0.0, DiagonalMode::VertexDegree);
        let grid = TimeGrid::linear(0.0, 40.0, 81).unwrap();
        let dist = master_equation_distribution(&t, 1, &grid).unwrap();
        let dev: Vec<f64> = dist
            .iter()
            .map(|p| p.iter().map(|x| (x - 0.2).powi(2)).sum::<f64>().sqrt())
            .collect();
        assert!(dev.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        assert!(*dev.last().unwrap() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let t = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(ClassicalWalk::new(&t, &TrapSet::empty()).is_err());
        let (t, _) = chain(3, 1.0, DiagonalMode::VertexDegree);
        assert!(classical_transition(&t, 4, 1, 1.0).is_err());
        let all = TrapSet::new(vec![1, 2, 3]).unwrap();
        let grid = TimeGrid::logarithmic(1.0, 2.0, 2).unwrap();
        assert!(matches!(
            classical_mean_survival(&t, &all, &grid),
            Err(Error::InvalidConfiguration(_))
        ));
    }
}
