//! Command-line front end: resolves a [`RunConfig`] from flags and an
//! optional JSON config file, runs one subcommand and writes its artifacts.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    collapse_curves, default_intermediate_window, default_spectral_window, detect_crossover_in,
    fastest, fit_decay_exponent, fit_exponential_tail, fit_spectral_exponent, gamma_sweep_spec,
    physical_time, FitResult, DEFAULT_GAMMAS, PHYSICAL_TIME_RULE, SWEEP_POINTS,
};
use crate::classical::ClassicalWalk;
use crate::curve::{SurvivalCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{classical_transfer_matrix, Coupling, DiagonalMode, HamiltonianSpec, TrapSet};
use crate::io;
use crate::pipeline::{classical_curve, QuantumRun};
use crate::plot::{Plot, Scale, Series};
use crate::quantum::powerlaw_matched;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, clap::Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    /// Eigenvalues of H, ascending decay rates and the spectral exponent.
    Spectrum,
    /// Quantum mean survival with power-law and exponential fits.
    Survival,
    /// Classical mean survival for the same graph.
    Classical,
    /// Time to reach a survival threshold across trap strengths.
    Sweep,
    /// Survival curves for several sizes, raw and rescaled.
    Collapse,
    /// Every figure family with default parameters.
    Reproduce,
}

impl Subcommand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Survival => "survival",
            Subcommand::Classical => "classical",
            Subcommand::Sweep => "sweep",
            Subcommand::Collapse => "collapse",
            Subcommand::Reproduce => "reproduce",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Parser, Debug)]
#[command(name = "trapwalk", version, about = "Quantum and classical trapping on chains and graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Subcommand,
    #[command(flatten)]
    pub options: Options,
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// Number of nodes.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Trap strength Γ.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Comma-separated 1-based trap nodes; `N` stands for the last node.
    #[arg(long, global = true)]
    pub traps: Option<String>,
    /// uniform_two or vertex_degree.
    #[arg(long, global = true)]
    pub diagonal: Option<String>,
    /// nearest or power_law.
    #[arg(long, global = true)]
    pub coupling: Option<String>,
    /// Power-law coupling exponent.
    #[arg(long, global = true)]
    pub exponent: Option<f64>,
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    /// Number of logarithmic grid points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// JSON config file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated trap strengths for the sweep.
    #[arg(long, global = true)]
    pub gammas: Option<String>,
    /// Survival threshold for the sweep.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Comma-separated sizes for the collapse.
    #[arg(long, global = true)]
    pub ns: Option<String>,
    /// Exponent used to rescale the collapse (fitted when absent).
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Spectral fit ranks as `lo,hi`.
    #[arg(long, global = true)]
    pub ranks: Option<String>,
    /// Power-law fit window in time as `lo,hi`.
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// Nearest-neighbour coupling in MHz, for physical time units.
    #[arg(long, global = true)]
    pub coupling_mhz: Option<f64>,
}

/// Fully resolved run parameters. Written verbatim as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub n: usize,
    pub gamma: f64,
    pub traps: Vec<usize>,
    pub diagonal: DiagonalMode,
    pub coupling: Coupling,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    pub ranks: Option<[usize; 2]>,
    pub window: Option<[f64; 2]>,
    pub threshold: f64,
    pub gammas: Vec<f64>,
    pub ns: Vec<usize>,
    pub mu: Option<f64>,
    pub coupling_mhz: Option<f64>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

/// Config-file view of [`RunConfig`]: every field optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    /// Present in manifests; the command line always picks the subcommand.
    #[serde(rename = "subcommand")]
    _subcommand: Option<Subcommand>,
    n: Option<usize>,
    gamma: Option<f64>,
    traps: Option<Vec<usize>>,
    diagonal: Option<DiagonalMode>,
    coupling: Option<Coupling>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    ranks: Option<[usize; 2]>,
    window: Option<[f64; 2]>,
    threshold: Option<f64>,
    gammas: Option<Vec<f64>>,
    ns: Option<Vec<usize>>,
    mu: Option<f64>,
    coupling_mhz: Option<f64>,
    out: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Validation(format!("--{flag}: cannot parse {x:?}")))
        })
        .collect()
}

fn parse_pair<T: std::str::FromStr + Copy>(flag: &str, s: &str) -> Result<[T; 2]> {
    match parse_list::<T>(flag, s)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Validation(format!("--{flag} expects two values `lo,hi`"))),
    }
}

impl RunConfig {
    /// Merge defaults, the config file and flags, then validate.
    pub fn resolve(subcommand: Subcommand, opts: &Options) -> Result<RunConfig> {
        let file: PartialConfig = match &opts.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => PartialConfig::default(),
        };
        let n = opts.n.or(file.n).unwrap_or(100);

        let traps = match &opts.traps {
            Some(s) => s
                .split(',')
                .map(|x| x.trim())
                .filter(|x| !x.is_empty())
                .map(|x| match x {
                    "N" | "n" => Ok(n),
                    _ => x
                        .parse()
                        .map_err(|_| Error::Validation(format!("--traps: cannot parse {x:?}"))),
                })
                .collect::<Result<Vec<usize>>>()?,
            None => file.traps.unwrap_or_else(|| TrapSet::chain_ends(n).indices().to_vec()),
        };

        let mut coupling = file.coupling.unwrap_or(Coupling::Nearest);
        if let Some(kind) = &opts.coupling {
            coupling = match kind.as_str() {
                "nearest" => Coupling::Nearest,
                "power_law" | "power-law" => {
                    let exponent = opts
                        .exponent
                        .or(match coupling {
                            Coupling::PowerLaw { exponent } => Some(exponent),
                            _ => None,
                        })
                        .ok_or_else(|| {
                            Error::Validation("power_law coupling needs --exponent".into())
                        })?;
                    Coupling::PowerLaw { exponent }
                }
                other => {
                    return Err(Error::Validation(format!(
                        "unknown coupling {other:?} (graph couplings come from a config file)"
                    )))
                }
            };
        } else if let Some(exponent) = opts.exponent {
            match &mut coupling {
                Coupling::PowerLaw { exponent: e } => *e = exponent,
                _ => {
                    return Err(Error::Validation(
                        "--exponent requires --coupling power_law".into(),
                    ))
                }
            }
        }

        let mut formats = match &opts.format {
            Some(s) => parse_list::<String>("format", s)?
                .iter()
                .map(|f| match f.as_str() {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    "svg" => Ok(Format::Svg),
                    other => Err(Error::Validation(format!("unknown format {other:?}"))),
                })
                .collect::<Result<Vec<_>>>()?,
            None => file.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json, Format::Svg]),
        };
        formats.sort();
        formats.dedup();

        let cfg = RunConfig {
            subcommand,
            n,
            gamma: opts.gamma.or(file.gamma).unwrap_or(1.0),
            traps,
            diagonal: match &opts.diagonal {
                Some(s) => s.parse()?,
                None => file.diagonal.unwrap_or_default(),
            },
            coupling,
            t_min: opts.t_min.or(file.t_min),
            t_max: opts.t_max.or(file.t_max),
            points: opts.points.or(file.points),
            ranks: match &opts.ranks {
                Some(s) => Some(parse_pair("ranks", s)?),
                None => file.ranks,
            },
            window: match &opts.window {
                Some(s) => Some(parse_pair("window", s)?),
                None => file.window,
            },
            threshold: opts.threshold.or(file.threshold).unwrap_or(0.5),
            gammas: match &opts.gammas {
                Some(s) => parse_list("gammas", s)?,
                None => file.gammas.unwrap_or_else(|| DEFAULT_GAMMAS.to_vec()),
            },
            ns: match &opts.ns {
                Some(s) => parse_list("ns", s)?,
                None => file.ns.unwrap_or_else(|| vec![40, 60, 80, 100]),
            },
            mu: opts.mu.or(file.mu),
            coupling_mhz: opts.coupling_mhz.or(file.coupling_mhz),
            out: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            formats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Validation(format!("threshold {} must lie in (0, 1)", self.threshold)));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Validation("sweep gammas must be positive and non-empty".into()));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 3) {
            return Err(Error::Validation("collapse sizes must be at least 3".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Validation(format!("mu = {mu} must be positive")));
            }
        }
        if let Some(c) = self.coupling_mhz {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Validation(format!("coupling_mhz = {c} must be positive")));
            }
        }
        if let Some([lo, hi]) = self.ranks {
            if lo < 1 || hi > self.n || hi < lo + 2 {
                return Err(Error::InvalidWindow(format!("ranks {lo},{hi} for N = {}", self.n)));
            }
        }
        if let Some([lo, hi]) = self.window {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::InvalidWindow(format!("time window {lo},{hi}")));
            }
        }
        if self.t_min.is_some() || self.t_max.is_some() || self.points.is_some() {
            TimeGrid::logarithmic(
                self.t_min.unwrap_or(0.1),
                self.t_max.unwrap_or(1e3),
                self.points.unwrap_or(200),
            )?;
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<HamiltonianSpec> {
        let spec = HamiltonianSpec {
            n: self.n,
            gamma: self.gamma,
            traps: TrapSet::new(self.traps.clone())?,
            diagonal: self.diagonal,
            coupling: self.coupling.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn spec_with(&self, n: usize, gamma: f64) -> Result<HamiltonianSpec> {
        let traps = if self.traps == TrapSet::chain_ends(self.n).indices() {
            TrapSet::chain_ends(n)
        } else {
            TrapSet::new(self.traps.clone())?
        };
        let spec = HamiltonianSpec { n, gamma, traps, ..self.spec()? };
        spec.validate()?;
        Ok(spec)
    }

    /// Log grid from the flags, filling gaps from the γ_min default.
    fn grid(&self, gamma_min: f64, default_points: usize) -> Result<TimeGrid> {
        let d = TimeGrid::default_for(gamma_min)?;
        TimeGrid::logarithmic(
            self.t_min.unwrap_or(d.t_min),
            self.t_max.unwrap_or(d.t_max),
            self.points.unwrap_or(default_points),
        )
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Collects the files a run writes.
struct Outputs<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a RunConfig, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { cfg, dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, bytes: Result<Vec<u8>>) -> Result<()> {
        if self.cfg.wants(Format::Csv) {
            self.raw(name, &bytes?)?;
        }
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.cfg.wants(Format::Json) {
            self.raw(name, &io::json_bytes(value)?)?;
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.cfg.wants(Format::Svg) {
            self.raw(name, plot.to_svg().as_bytes())?;
        }
        Ok(())
    }
}

fn fit_json(r: &Result<FitResult>) -> Value {
    match r {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
    }
}

fn curve_series(label: impl Into<String>, c: &SurvivalCurve) -> Series {
    Series::line(label, c.times.clone(), c.values.clone())
}

fn spectral_fit(run: &QuantumRun, ranks: Option<[usize; 2]>) -> Result<FitResult> {
    let (lo, hi) = match ranks {
        Some([lo, hi]) => (lo, hi),
        None => default_spectral_window(run.spec.n),
    };
    fit_spectral_exponent(&run.spectrum, lo, hi)
}

fn run_spectrum(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let run = QuantumRun::new(&cfg.spec()?)?;
    let fit = spectral_fit(&run, cfg.ranks);
    out.csv("spectrum.csv", io::spectrum_csv(&run.spectrum))?;
    out.json("spectral_fit.json", &fit_json(&fit))?;

    let ranks: Vec<f64> = (1..=run.spectrum.len()).map(|l| l as f64).collect();
    let mut plot = Plot::new(format!("Decay rates, N = {}, Γ = {}", cfg.n, cfg.gamma), "rank l", "γ_l")
        .scales(Scale::Linear, Scale::Log)
        .with(Series::line("γ_l", ranks.clone(), run.spectrum.gammas()).markers());
    if let Ok(f) = &fit {
        let (lo, hi) = (f.window.0 as usize, f.window.1 as usize);
        let x: Vec<f64> = (lo..=hi).map(|l| l as f64).collect();
        let y = x.iter().map(|l| f.prefactor * l.powf(f.exponent)).collect();
        plot = plot.with(Series::line(format!("a·l^{:.3}", f.exponent), x, y).dashed());
    }
    out.svg("spectrum.svg", &plot)?;
    let inset = Plot::new("Decay rates (log-log)", "rank l", "γ_l")
        .with(Series::line("γ_l", ranks, run.spectrum.gammas()).markers());
    out.svg("spectrum_loglog.svg", &inset)?;

    Ok(json!({
        "n": cfg.n,
        "gamma": cfg.gamma,
        "gamma_min": run.gamma_min,
        "mu": fit.as_ref().ok().map(|f| f.exponent),
        "prefactor": fit.as_ref().ok().map(|f| f.prefactor),
        "spectral_fit": fit_json(&fit),
    }))
}

fn run_survival(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let run = QuantumRun::new(&cfg.spec()?)?;
    let grid = cfg.grid(run.gamma_min, 200)?;
    let curve = run.mean_survival(&grid)?;
    let longtime = run.mean_survival_longtime(&grid)?;
    let spectral = spectral_fit(&run, cfg.ranks);

    let (w_lo, w_hi) = match cfg.window {
        Some([lo, hi]) => (lo, hi),
        None => default_intermediate_window(cfg.n, run.gamma_min),
    };
    let decay = fit_decay_exponent(&curve, w_lo, w_hi);
    let tail = if run.gamma_min > 0.0 {
        fit_exponential_tail(&curve, 2.0 / run.gamma_min, grid.t_max)
    } else {
        Err(Error::InvalidWindow("gamma_min = 0, no exponential tail".into()))
    };
    let crossover = detect_crossover_in(&curve, w_lo, w_hi);

    out.csv("survival.csv", io::curve_csv(&curve))?;
    out.csv("survival_longtime.csv", io::curve_csv(&longtime))?;
    out.json("survival.json", &curve)?;

    let mut loglog = Plot::new(format!("Mean survival, N = {}, Γ = {}", cfg.n, cfg.gamma), "t", "Π_M(t)")
        .with(curve_series("quantum", &curve));
    if let Ok(f) = &spectral {
        if let Ok(model) = powerlaw_matched(&curve, f.exponent, w_lo, w_hi, &grid) {
            loglog = loglog.with(curve_series(format!("t^(-1/{:.3})", f.exponent), &model).dashed());
        }
    }
    out.svg("survival_loglog.svg", &loglog)?;
    let mut loglin = Plot::new(format!("Mean survival, N = {}, Γ = {}", cfg.n, cfg.gamma), "t", "Π_M(t)")
        .scales(Scale::Linear, Scale::Log)
        .with(curve_series("quantum", &curve));
    if let Ok(f) = &tail {
        let y = grid.points().iter().map(|t| f.prefactor * (-f.exponent * t).exp()).collect();
        loglin = loglin.with(Series::line("exp(-2γ_min t)", grid.points(), y).dashed());
    }
    out.svg("survival_loglinear.svg", &loglin)?;

    let mut summary = json!({
        "n": cfg.n,
        "gamma": cfg.gamma,
        "gamma_min": run.gamma_min,
        "mu": spectral.as_ref().ok().map(|f| f.exponent),
        "spectral_fit": fit_json(&spectral),
        "decay_fit": fit_json(&decay),
        "tail_fit": fit_json(&tail),
        "crossover": match &crossover {
            Ok(c) => serde_json::to_value(c)?,
            Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
        },
        "underflow_clamped": curve.meta.underflow_clamped,
    });
    if let (Some(mhz), Ok(c)) = (cfg.coupling_mhz, &crossover) {
        summary["crossover_us"] = json!(physical_time(c.time, mhz));
        summary["physical_time_rule"] = json!(PHYSICAL_TIME_RULE);
    }
    Ok(summary)
}

fn run_classical(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let spec = cfg.spec()?;
    let walk = ClassicalWalk::new(&classical_transfer_matrix(&spec), &spec.active_traps())?;
    let rate = walk.slowest_rate();
    let grid = cfg.grid(rate / 2.0, 200)?;
    let curve = classical_curve(&spec, &grid)?;
    let tail = if rate > 0.0 {
        fit_exponential_tail(&curve, 1.0 / rate, grid.t_max)
    } else {
        Err(Error::InvalidWindow("no decay without traps".into()))
    };
    out.csv("classical.csv", io::curve_csv(&curve))?;
    out.json("classical.json", &curve)?;
    out.svg(
        "classical.svg",
        &Plot::new(format!("Classical survival, N = {}, Γ = {}", cfg.n, cfg.gamma), "t", "P_M(t)")
            .scales(Scale::Linear, Scale::Log)
            .with(curve_series("classical", &curve)),
    )?;
    Ok(json!({
        "n": cfg.n,
        "gamma": cfg.gamma,
        "slowest_rate": rate,
        "tail_fit": fit_json(&tail),
        "note": curve.meta.note,
    }))
}

fn run_sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let base = cfg.spec()?;
    let grid = if cfg.t_min.is_some() || cfg.t_max.is_some() || cfg.points.is_some() {
        Some(TimeGrid::logarithmic(
            cfg.t_min.unwrap_or(0.1),
            cfg.t_max.unwrap_or(1e6),
            cfg.points.unwrap_or(SWEEP_POINTS),
        )?)
    } else {
        None
    };
    let points = gamma_sweep_spec(&base, &cfg.gammas, cfg.threshold, grid)?;
    out.csv("sweep.csv", io::sweep_csv(&points))?;
    let family: Vec<(String, &SurvivalCurve)> =
        points.iter().map(|p| (io::fmt_float(p.gamma), &p.curve)).collect();
    out.csv("sweep_curves.csv", io::family_csv("gamma", &family))?;
    let mut plot = Plot::new(format!("Mean survival vs Γ, N = {}", cfg.n), "t", "Π_M(t)");
    for p in &points {
        plot = plot.with(curve_series(format!("Γ = {}", p.gamma), &p.curve));
    }
    out.svg("sweep.svg", &plot)?;
    let best = fastest(&points);
    Ok(json!({
        "n": cfg.n,
        "threshold": cfg.threshold,
        "times": points.iter().map(|p| json!({ "gamma": p.gamma, "t_threshold": p.t_threshold })).collect::<Vec<_>>(),
        "fastest_gamma": best.map(|p| p.gamma),
        "fastest_time": best.and_then(|p| p.t_threshold),
    }))
}

fn collapse_family(cfg: &RunConfig, ns: &[usize]) -> Result<Vec<(QuantumRun, SurvivalCurve)>> {
    exec::try_map(ns, |&n| {
        let run = QuantumRun::new(&cfg.spec_with(n, cfg.gamma)?)?;
        let grid = cfg.grid(run.gamma_min, SWEEP_POINTS)?;
        let curve = run.mean_survival(&grid)?;
        Ok((run, curve))
    })
}

/// `analysed` picks the members entering the dispersion; all are plotted.
fn run_collapse_with(
    cfg: &RunConfig,
    out: &mut Outputs,
    ns: &[usize],
    analysed: impl Fn(usize) -> bool,
) -> Result<Value> {
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let family = collapse_family(cfg, &sorted)?;
    let (mu, mu_source) = match cfg.mu {
        Some(mu) => (mu, "given".to_string()),
        None => {
            let (run, _) = family.last().expect("non-empty family");
            (spectral_fit(run, None)?.exponent, format!("fitted at N = {}", run.spec.n))
        }
    };
    let curves: Vec<SurvivalCurve> = family.iter().map(|(_, c)| c.clone()).collect();
    let selected: Vec<SurvivalCurve> =
        curves.iter().filter(|c| analysed(c.meta.n.unwrap_or(0))).cloned().collect();
    let report = collapse_curves(&selected, mu)?;
    let everything = collapse_curves(&curves, mu).ok();

    let raw: Vec<(String, &SurvivalCurve)> =
        curves.iter().map(|c| (c.meta.n.unwrap_or(0).to_string(), c)).collect();
    out.csv("collapse_raw.csv", io::family_csv("n", &raw))?;
    let rescaled_curves = everything.as_ref().map(|r| &r.curves).unwrap_or(&report.curves);
    let rescaled: Vec<(String, &SurvivalCurve)> =
        rescaled_curves.iter().map(|(n, c)| (n.to_string(), c)).collect();
    out.csv("collapse_rescaled.csv", io::family_csv("n", &rescaled))?;

    let mut raw_plot = Plot::new(format!("Mean survival, Γ = {}", cfg.gamma), "t", "Π_M(t)");
    for (label, c) in &raw {
        raw_plot = raw_plot.with(curve_series(format!("N = {label}"), c));
    }
    out.svg("collapse_raw.svg", &raw_plot)?;
    let mut scaled_plot =
        Plot::new(format!("Rescaled, μ = {mu:.4}"), format!("t / N^(3 - {mu:.3})"), "Π_M");
    for (label, c) in &rescaled {
        scaled_plot = scaled_plot.with(curve_series(format!("N = {label}"), c));
    }
    out.svg("collapse_rescaled.svg", &scaled_plot)?;

    let crossovers: Vec<Value> = family
        .iter()
        .map(|(run, c)| {
            let (lo, hi) = default_intermediate_window(run.spec.n, run.gamma_min);
            json!({
                "n": run.spec.n,
                "gamma_min": run.gamma_min,
                "crossover": detect_crossover_in(c, lo, hi).ok().map(|x| x.time),
            })
        })
        .collect();
    let summary = json!({
        "gamma": cfg.gamma,
        "ns": sorted,
        "analysed_ns": report.curves.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
        "mu": mu,
        "mu_source": mu_source,
        "dispersion": report.dispersion,
        "window": report.window,
        "members": crossovers,
    });
    out.json("collapse.json", &summary)?;
    Ok(summary)
}

fn run_reproduce(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let base = RunConfig {
        n: 100,
        gamma: 1.0,
        traps: vec![1, 100],
        t_min: None,
        t_max: None,
        points: None,
        ranks: None,
        window: None,
        ..cfg.clone()
    };
    let dir = out.dir.clone();
    let mut part = |name: &str,
                    c: &RunConfig,
                    f: &dyn Fn(&RunConfig, &mut Outputs) -> Result<Value>|
     -> Result<Value> {
        let mut sub = Outputs::new(c, &dir.join(name))?;
        let v = f(c, &mut sub)?;
        out.files.extend(sub.files.iter().map(|f| format!("{name}/{f}")));
        Ok(v)
    };
    let spectrum = part("spectrum", &base, &run_spectrum)?;
    let survival = part("survival", &base, &run_survival)?;
    let classical = part("classical", &base, &run_classical)?;
    let collapse_cfg = RunConfig { ns: (2..=10).map(|k| 10 * k).collect(), ..base.clone() };
    let collapse = part("collapse", &collapse_cfg, &|c, o| {
        run_collapse_with(c, o, &c.ns, |n| n >= 40)
    })?;
    let sweep_cfg = RunConfig { n: 50, traps: vec![1, 50], ..base.clone() };
    let sweep = part("sweep", &sweep_cfg, &run_sweep)?;
    Ok(json!({
        "gamma_min": spectrum["gamma_min"],
        "mu": spectrum["mu"],
        "spectrum": spectrum,
        "survival": survival,
        "classical": classical,
        "collapse": collapse,
        "sweep": sweep,
    }))
}

/// Run one subcommand and write its artifacts, `manifest.json` and
/// `summary.json` under `cfg.out`. Returns the summary.
pub fn run(cfg: &RunConfig) -> Result<Value> {
    cfg.validate()?;
    let mut out = Outputs::new(cfg, &cfg.out)?;
    let mut summary = match cfg.subcommand {
        Subcommand::Spectrum => run_spectrum(cfg, &mut out)?,
        Subcommand::Survival => run_survival(cfg, &mut out)?,
        Subcommand::Classical => run_classical(cfg, &mut out)?,
        Subcommand::Sweep => run_sweep(cfg, &mut out)?,
        Subcommand::Collapse => run_collapse_with(cfg, &mut out, &cfg.ns, |_| true)?,
        Subcommand::Reproduce => run_reproduce(cfg, &mut out)?,
    };
    summary["subcommand"] = json!(cfg.subcommand.as_str());
    summary["diagonal"] = json!(cfg.diagonal);
    summary["time_unit"] = json!("hbar / coupling");
    io::write_json(&cfg.out.join("manifest.json"), cfg)?;
    out.files.push("manifest.json".into());
    out.files.push("summary.json".into());
    out.files.sort();
    summary["files"] = json!(out.files);
    io::write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Entry point for the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 2;
        }
    };
    match RunConfig::resolve(cli.command, &cli.options).and_then(|cfg| run(&cfg)) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            1
        }
    }
}
