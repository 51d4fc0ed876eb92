//! Fits and scaling analyses on spectra and survival curves.

mod collapse;
mod crossover;
mod fit;
mod sweep;

pub use collapse::{collapse_curves, rescale_exponent, CollapseReport, COLLAPSE_POINTS};
pub use crossover::{
    default_intermediate_window, detect_crossover, detect_crossover_in, running_slope, Crossover,
    PLATEAU_BAND, SETTLE_POINTS,
};
pub use fit::{
    fit_decay_exponent, fit_exponential_tail, fit_spectral_exponent, line_fit, power_law_fit,
    FitResult, LineFit,
};
pub use sweep::{
    fastest, gamma_sweep, gamma_sweep_spec, time_to_threshold, SweepPoint, DEFAULT_GAMMAS,
    SWEEP_POINTS,
};

/// How [`physical_time`] converts units; echoed into output metadata.
pub const PHYSICAL_TIME_RULE: &str =
    "t_us = t / (2*pi*coupling_MHz); coupling read as an ordinary frequency";

/// Default rank window [max(2, N/10), 6N/10] for the spectral fit.
pub fn default_spectral_window(n: usize) -> (usize, usize) {
    ((n / 10).max(2), 6 * n / 10)
}

/// Dimensionless time (units of ħ/coupling) to microseconds for a coupling
/// given in MHz.
pub fn physical_time(t: f64, coupling_mhz: f64) -> f64 {
    t / (2.0 * std::f64::consts::PI * coupling_mhz)
}
