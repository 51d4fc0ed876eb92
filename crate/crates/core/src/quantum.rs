//! CTQW with traps: transition amplitudes, per-node and mean survival
//! probabilities from the biorthonormal spectrum, and a direct Runge-Kutta
//! integration of the Schrödinger equation used as an independent check.
//!
//! The right eigenvectors of a non-normal H are not orthogonal, so the
//! full-basis term Σ_k |α_kj|² carries the Gram matrix G = V^† V rather than
//! collapsing to Σ_l e^{-2γ_l t}|⟨Φ̃_l|j⟩|². Everything below is exact for any
//! diagonalizable H; the textbook single-sum forms are recovered when G = 1.

use nalgebra::{DMatrix, DVector};

use crate::curve::{CurveMeta, CurveModel, SurvivalCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{TrapSet, C64};
use crate::spectral::Spectrum;

/// Precomputed overlap tables for one spectrum and trap set.
///
/// Construction is O(N³); every survival evaluation afterwards is O(N²) per
/// time point.
pub struct QuantumWalk<'a> {
    spectrum: &'a Spectrum,
    traps: TrapSet,
    non_traps: Vec<usize>,
    energies: Vec<C64>,
    /// G = V^† V.
    gram: DMatrix<C64>,
    /// C[l', l] = (V^† Q V)[l', l] · (W Q W^†)[l, l'], Q the non-trap projector.
    pair_weights: DMatrix<C64>,
}

fn check_node(j: usize, n: usize) -> Result<usize> {
    if j == 0 || j > n {
        Err(Error::NodeOutOfRange { index: j, n })
    } else {
        Ok(j - 1)
    }
}

impl<'a> QuantumWalk<'a> {
    pub fn new(spectrum: &'a Spectrum, traps: &TrapSet) -> Result<Self> {
        let n = spectrum.len();
        if let Some(&m) = traps.indices().last() {
            check_node(m, n)?;
        }
        if traps.len() >= n {
            return Err(Error::InvalidConfiguration(format!(
                "{} traps cover all {n} nodes; survival is undefined",
                traps.len()
            )));
        }
        let v = spectrum.right();
        let w = spectrum.left();
        let non_traps = traps.complement(n);

        let mut qv = v.clone();
        let mut wq = w.clone();
        for m in traps.zero_based() {
            qv.row_mut(m).fill(C64::new(0.0, 0.0));
            wq.column_mut(m).fill(C64::new(0.0, 0.0));
        }
        let a = v.adjoint() * &qv;
        let b = &wq * w.adjoint();
        let pair_weights = DMatrix::from_fn(n, n, |lp, l| a[(lp, l)] * b[(l, lp)]);

        Ok(QuantumWalk {
            spectrum,
            traps: traps.clone(),
            non_traps,
            energies: spectrum.eigenvalues().iter().map(|e| e.to_complex()).collect(),
            gram: v.adjoint() * v,
            pair_weights,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum
    }

    pub fn traps(&self) -> &TrapSet {
        &self.traps
    }

    /// e^{-iE_l t} for every l.
    fn phases(&self, t: f64) -> DVector<C64> {
        DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|e| (C64::new(0.0, -t) * e).exp()),
        )
    }

    /// α_kj(t) = Σ_l e^{-iE_l t} ⟨k|Φ_l⟩⟨Φ̃_l|j⟩.
    pub fn amplitude(&self, k: usize, j: usize, t: f64) -> Result<C64> {
        let n = self.spectrum.len();
        let (k, j) = (check_node(k, n)?, check_node(j, n)?);
        let d = self.phases(t);
        let v = self.spectrum.right();
        let w = self.spectrum.left();
        Ok((0..n).map(|l| d[l] * v[(k, l)] * w[(l, j)]).sum())
    }

    /// u_l = e^{-iE_l t} ⟨Φ̃_l|j⟩, the start state in the eigenbasis at time t.
    fn evolved_coefficients(&self, j0: usize, t: f64) -> DVector<C64> {
        let w = self.spectrum.left();
        let mut u = self.phases(t);
        for (l, x) in u.iter_mut().enumerate() {
            *x *= w[(l, j0)];
        }
        u
    }

    /// Σ_{k∉M} π_kj(t) as the full-basis term minus the trap-projected term.
    pub fn node_survival(&self, j: usize, t: f64) -> Result<f64> {
        let j0 = check_node(j, self.spectrum.len())?;
        if self.traps.contains(j) {
            return Err(Error::InvalidStart(j));
        }
        let u = self.evolved_coefficients(j0, t);
        let full = u.dotc(&(&self.gram * &u)).re;
        let v = self.spectrum.right();
        let trapped: f64 = self
            .traps
            .zero_based()
            .map(|m| {
                let alpha: C64 = (0..u.len()).map(|l| v[(m, l)] * u[l]).sum();
                alpha.norm_sqr()
            })
            .sum();
        Ok(full - trapped)
    }

    /// Σ_{k∉M} |α_kj(t)|² summed directly over non-trap nodes.
    pub fn node_survival_direct(&self, j: usize, t: f64) -> Result<f64> {
        let j0 = check_node(j, self.spectrum.len())?;
        if self.traps.contains(j) {
            return Err(Error::InvalidStart(j));
        }
        let u = self.evolved_coefficients(j0, t);
        let psi = self.spectrum.right() * u;
        Ok(self.non_traps.iter().map(|&k| psi[k].norm_sqr()).sum())
    }

    /// Π_M(t) = (N-M)⁻¹ Σ_{l,l'} e^{-i(E_l - E_l'^*)t} C[l', l].
    pub fn mean_survival_at(&self, t: f64) -> f64 {
        let d = self.phases(t);
        let s = d.dotc(&(&self.pair_weights * &d));
        s.re / self.non_traps.len() as f64
    }

    /// (N-M)⁻¹ Σ_l e^{-2γ_l t}.
    pub fn mean_survival_longtime_at(&self, t: f64) -> f64 {
        let sum: f64 = self
            .spectrum
            .eigenvalues()
            .iter()
            .map(|e| (-2.0 * e.gamma * t).exp())
            .sum();
        sum / self.non_traps.len() as f64
    }

    fn meta(&self) -> CurveMeta {
        CurveMeta {
            n: Some(self.spectrum.len()),
            traps: self.traps.indices().to_vec(),
            gamma_min: self.spectrum.gamma_min().ok(),
            ..CurveMeta::default()
        }
    }

    pub fn mean_survival(&self, grid: &TimeGrid) -> Result<SurvivalCurve> {
        grid.validate()?;
        let times = grid.points();
        let values = exec::map(&times, |&t| self.mean_survival_at(t));
        Ok(SurvivalCurve::new(times, values, CurveModel::QuantumExact, self.meta()))
    }

    pub fn mean_survival_longtime(&self, grid: &TimeGrid) -> Result<SurvivalCurve> {
        grid.validate()?;
        let times = grid.points();
        let values = exec::map(&times, |&t| self.mean_survival_longtime_at(t));
        Ok(SurvivalCurve::new(times, values, CurveModel::QuantumLongtime, self.meta()))
    }
}

pub fn transition_amplitude(s: &Spectrum, k: usize, j: usize, t: f64) -> Result<C64> {
    QuantumWalk::new(s, &TrapSet::empty())?.amplitude(k, j, t)
}

pub fn node_survival(s: &Spectrum, j: usize, traps: &TrapSet, t: f64) -> Result<f64> {
    QuantumWalk::new(s, traps)?.node_survival(j, t)
}

pub fn mean_survival(s: &Spectrum, traps: &TrapSet, grid: &TimeGrid) -> Result<SurvivalCurve> {
    QuantumWalk::new(s, traps)?.mean_survival(grid)
}

pub fn mean_survival_longtime(
    s: &Spectrum,
    traps: &TrapSet,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    QuantumWalk::new(s, traps)?.mean_survival_longtime(grid)
}

/// Γ(1 + 1/μ) · (2 a t)^(-1/μ), the integral ∫dx e^{-2atx^μ}.
pub fn powerlaw_model(a: f64, mu: f64, grid: &TimeGrid) -> Result<SurvivalCurve> {
    if !(a > 0.0 && mu > 0.0) {
        return Err(Error::Validation(format!(
            "power-law model needs a > 0 and mu > 0, got a = {a}, mu = {mu}"
        )));
    }
    grid.validate()?;
    let c = statrs::function::gamma::gamma(1.0 + 1.0 / mu) * (2.0 * a).powf(-1.0 / mu);
    let times = grid.points();
    let values = times.iter().map(|&t| c * t.powf(-1.0 / mu)).collect();
    Ok(SurvivalCurve::new(
        times,
        values,
        CurveModel::QuantumPowerlawModel,
        CurveMeta {
            note: Some(format!("a = {a}, mu = {mu}")),
            ..CurveMeta::default()
        },
    ))
}

/// c · t^(-1/μ) with c chosen so the model equals `reference` at the
/// log-midpoint of `[t_lo, t_hi]`; used to overlay the power law on data.
pub fn powerlaw_matched(
    reference: &SurvivalCurve,
    mu: f64,
    t_lo: f64,
    t_hi: f64,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    if !(mu > 0.0 && t_lo > 0.0 && t_lo < t_hi) {
        return Err(Error::InvalidWindow(format!("[{t_lo}, {t_hi}] with mu = {mu}")));
    }
    grid.validate()?;
    let mid = (t_lo * t_hi).sqrt();
    let anchor = reference
        .interpolate_log(mid)
        .ok_or_else(|| Error::InvalidWindow(format!("reference not positive at t = {mid}")))?;
    let c = anchor * mid.powf(1.0 / mu);
    let times = grid.points();
    let values = times.iter().map(|&t| c * t.powf(-1.0 / mu)).collect();
    Ok(SurvivalCurve::new(
        times,
        values,
        CurveModel::QuantumPowerlawModel,
        CurveMeta {
            note: Some(format!("mu = {mu}, matched at t = {mid}")),
            ..reference.meta.clone()
        },
    ))
}

/// Maximum number of RK4 steps an oracle run may take.
pub const MAX_ORACLE_STEPS: f64 = 1e9;

fn max_row_sum<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Fixed-step classical RK4 from 0 through every grid time, with step at most
/// `0.01 / ‖A‖_∞`. `rhs` evaluates the derivative into its last argument and
/// `observe` maps the state at each grid time to a recorded value.
pub(crate) fn rk4_trajectory<T, R>(
    generator: &DMatrix<T>,
    start: usize,
    grid: &TimeGrid,
    rhs: impl Fn(&DMatrix<T>, &DVector<T>, &mut DVector<T>),
    observe: impl Fn(&DVector<T>) -> R,
) -> Result<(Vec<f64>, Vec<R>)>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    grid.validate()?;
    let n = generator.nrows();
    let j0 = check_node(start, n)?;
    let norm = max_row_sum(generator);
    let h_max = if norm > 0.0 { 0.01 / norm } else { f64::INFINITY };
    let times = grid.points();
    let total = times.last().copied().unwrap_or(0.0) / h_max;
    if total > MAX_ORACLE_STEPS {
        return Err(Error::StepUnderflow(total));
    }

    let mut psi = DVector::<T>::zeros(n);
    psi[j0] = T::one();
    let (mut k1, mut k2, mut k3, mut k4) = (psi.clone(), psi.clone(), psi.clone(), psi.clone());
    let mut tmp = psi.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in &times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let hr = T::from_real(h);
            let half = T::from_real(0.5 * h);
            let sixth = T::from_real(h / 6.0);
            let two = T::from_real(2.0);
            for _ in 0..steps {
                rhs(generator, &psi, &mut k1);
                tmp.copy_from(&psi);
                tmp.axpy(half, &k1, T::one());
                rhs(generator, &tmp, &mut k2);
                tmp.copy_from(&psi);
                tmp.axpy(half, &k2, T::one());
                rhs(generator, &tmp, &mut k3);
                tmp.copy_from(&psi);
                tmp.axpy(hr, &k3, T::one());
                rhs(generator, &tmp, &mut k4);
                k2.axpy(T::one(), &k3, T::one());
                k1.axpy(two, &k2, T::one());
                k1.axpy(T::one(), &k4, T::one());
                psi.axpy(sixth, &k1, T::one());
            }
            t = target;
        }
        out.push(observe(&psi));
    }
    Ok((times, out))
}

/// Integrate i dψ/dt = Hψ from ψ(0) = |start⟩ and report Σ_{k∉M} |ψ_k(t)|².
pub fn propagate_oracle(
    h: &DMatrix<C64>,
    start: usize,
    traps: &TrapSet,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    if let Some(&m) = traps.indices().last() {
        check_node(m, h.nrows())?;
    }
    let non_traps = traps.complement(h.nrows());
    let minus_i = C64::new(0.0, -1.0);
    let (times, values) = rk4_trajectory(
        h,
        start,
        grid,
        |h, psi, out| out.gemv(minus_i, h, psi, C64::new(0.0, 0.0)),
        |psi| non_traps.iter().map(|&k| psi[k].norm_sqr()).sum(),
    )?;
    Ok(SurvivalCurve::new(
        times,
        values,
        CurveModel::Oracle,
        CurveMeta {
            n: Some(h.nrows()),
            traps: traps.indices().to_vec(),
            note: Some(format!("rk4 quantum, start node {start}")),
            ..CurveMeta::default()
        },
    ))
}
