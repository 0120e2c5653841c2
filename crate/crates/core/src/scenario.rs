//! Declarative scenarios and the write / dark-storage / read pipeline built on them.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! id = "ramp"
//! [medium]
//! alpha_l = 24.0
//! gamma_s_per_us = 1e-3
//! [input]
//! shape = "ramp_pos"
//! [target]
//! shape = "gaussian"
//! sigma = 6.0
//! [protocol]
//! storage_time_us = 100.0
//! ```
//!
//! Only `medium.alpha_l`, `input` and `target` are required; see the README for every field.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, EnvelopeKind, SpinWave};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io;
use crate::medium::{MediumParams, DEFAULT_GAMMA};
use crate::metrics::{bin_analysis, efficiency, overlap, MetricsReport};
use crate::optimal::{optimal_mode, OptimalModeConfig, OptimalModeResult};
use crate::pulses::{make_gaussian, make_ramp_at, make_time_bin_parts, RampSign};
use crate::shaping::{
    refine_retrieval, retrieval_control, solve_clock_range, universal_retrieval_mode, writing_control_for_mode,
    ShapedControl, ShapingOptions, ShapingReport, UniversalModeOptions,
};
use crate::solver::{dark_storage, energy_balance, propagate_stage, SolverOptions, StageRecord};

pub const SUMMARY_HEADER: [&str; 16] = [
    "id",
    "alpha_l",
    "gamma_s_tau",
    "eta",
    "j2",
    "fidelity",
    "hom_coincidence",
    "eta_max",
    "store_efficiency",
    "eta_r",
    "leak_energy",
    "balance_write",
    "balance_read",
    "j2_bins",
    "bin_ratio",
    "warnings",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_id")]
    pub id: String,
    pub medium: MediumSpec,
    pub input: PulseSpec,
    pub target: PulseSpec,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(alias = "alphaL")]
    pub alpha_l: f64,
    /// Optical polarization decay rate, rad/s.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Spin-wave decay rate, rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    /// Spin-wave decay rate, 1/us.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s_per_us: Option<f64>,
    /// One-photon detuning in units of gamma.
    #[serde(default)]
    pub delta: f64,
}

/// Early and late bin intervals of a time-bin target.
pub type BinWindows = [(f64, f64); 2];

/// Pulse shape. Positions (`center`, `start`) are measured from the start of the pulse's window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSpec {
    Gaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
    },
    RampPos {
        #[serde(default = "default_ramp")]
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rise: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
    },
    RampNeg {
        #[serde(default = "default_ramp")]
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rise: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
    },
    TimeBin {
        theta: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default = "default_sigma_bin")]
        sigma_bin: f64,
        #[serde(default = "default_separation")]
        separation: f64,
    },
    /// Either a CSV of `(t, re, im)` rows or real amplitudes spread evenly over the window.
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitudes: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    /// Dark storage time in units of 1/gamma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_time_us: Option<f64>,
    #[serde(default = "default_window")]
    pub write_window: f64,
    #[serde(default = "default_window")]
    pub read_window: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    /// Full-solver passes correcting the retrieval clock for non-adiabatic lag; 0 keeps the adiabatic control.
    #[serde(default = "default_refine")]
    pub refine_passes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_nz")]
    pub n_z: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_id() -> String {
    "scenario".into()
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_sigma() -> f64 {
    6.0
}
fn default_ramp() -> f64 {
    40.0
}
fn default_sigma_bin() -> f64 {
    3.5
}
fn default_separation() -> f64 {
    21.0
}
fn default_window() -> f64 {
    50.0
}
fn default_omega_max() -> f64 {
    crate::shaping::DEFAULT_OMEGA_MAX
}
fn default_refine() -> usize {
    3
}
fn default_dt() -> f64 {
    0.02
}
fn default_nz() -> usize {
    crate::solver::DEFAULT_NZ
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        Self {
            storage_time: None,
            storage_time_us: None,
            write_window: default_window(),
            read_window: default_window(),
            omega_max: default_omega_max(),
            refine_passes: default_refine(),
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            n_z: default_nz(),
        }
    }
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

impl PulseSpec {
    pub fn gaussian() -> Self {
        PulseSpec::Gaussian {
            sigma: default_sigma(),
            center: None,
        }
    }

    pub fn ramp(sign: RampSign) -> Self {
        let (duration, rise, start) = (default_ramp(), None, None);
        match sign {
            RampSign::Positive => PulseSpec::RampPos { duration, rise, start },
            RampSign::Negative => PulseSpec::RampNeg { duration, rise, start },
        }
    }

    pub fn time_bin(theta: f64, phi: f64) -> Self {
        PulseSpec::TimeBin {
            theta,
            phi,
            sigma_bin: default_sigma_bin(),
            separation: default_separation(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PulseSpec::Gaussian { .. } => "gaussian",
            PulseSpec::RampPos { .. } => "ramp_pos",
            PulseSpec::RampNeg { .. } => "ramp_neg",
            PulseSpec::TimeBin { .. } => "time_bin",
            PulseSpec::Custom { .. } => "custom",
        }
    }

    /// Builds the unit-energy envelope on `grid`; time-bin shapes also return their bin windows.
    pub fn build(&self, grid: &TimeGrid) -> Result<(Envelope, Option<BinWindows>)> {
        let t0 = grid.t_start();
        let span = grid.span();
        let env = match self {
            PulseSpec::Gaussian { sigma, center } => make_gaussian(t0 + center.unwrap_or(0.5 * span), *sigma, grid)?,
            PulseSpec::RampPos { duration, rise, start } | PulseSpec::RampNeg { duration, rise, start } => {
                let sign = if matches!(self, PulseSpec::RampPos { .. }) {
                    RampSign::Positive
                } else {
                    RampSign::Negative
                };
                let start = t0 + start.unwrap_or(0.5 * (span - duration));
                make_ramp_at(sign, *duration, start, rise.unwrap_or(duration / 20.0), grid)?
            }
            PulseSpec::TimeBin {
                theta,
                phi,
                sigma_bin,
                separation,
            } => {
                let tb = make_time_bin_parts(*theta, *phi, *sigma_bin, *separation, grid)?;
                let half = 0.5 * separation;
                let (c1, c2) = tb.centers;
                let windows = [
                    ((c1 - half).max(t0), c1 + half),
                    (c2 - half, (c2 + half).min(grid.t_end())),
                ];
                return Ok((tb.envelope, Some(windows)));
            }
            PulseSpec::Custom { file, amplitudes } => {
                let local = TimeGrid::new(0.0, span, grid.n_steps())?;
                let env = match (file, amplitudes) {
                    (Some(f), None) => io::read_envelope_csv(f, &local, EnvelopeKind::Signal)?,
                    (None, Some(a)) if a.len() >= 2 => {
                        let step = span / (a.len() - 1) as f64;
                        Envelope::from_fn(local, EnvelopeKind::Signal, |t| {
                            let x = (t / step).min((a.len() - 1) as f64);
                            let k = (x.floor() as usize).min(a.len() - 2);
                            let f = x - k as f64;
                            Complex64::new(a[k] * (1.0 - f) + a[k + 1] * f, 0.0)
                        })?
                    }
                    _ => {
                        return Err(Error::Config(
                            "custom pulse needs exactly one of `file` or `amplitudes` (>= 2 values)".into(),
                        ))
                    }
                };
                Envelope::new(*grid, env.into_samples(), EnvelopeKind::Signal)?.normalized()?
            }
        };
        Ok((env, None))
    }
}

/// Everything a run needs, in dimensionless form.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub medium: MediumParams,
    pub tau: f64,
    pub write_grid: TimeGrid,
    pub read_grid: TimeGrid,
    pub input: Envelope,
    pub target: Envelope,
    pub bins: Option<[(f64, f64); 2]>,
    pub solver: SolverOptions,
    pub omega_max: f64,
    pub refine_passes: usize,
}

impl ScenarioSpec {
    /// Minimal scenario with defaults everywhere else.
    pub fn new(id: &str, alpha_l: f64, input: PulseSpec, target: PulseSpec) -> Self {
        Self {
            id: id.into(),
            medium: MediumSpec {
                alpha_l,
                gamma: DEFAULT_GAMMA,
                gamma_s: None,
                gamma_s_per_us: None,
                delta: 0.0,
            },
            input,
            target,
            protocol: ProtocolSpec::default(),
            grid: GridSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a scenario file; relative custom-pulse paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.input, &mut spec.target] {
            if let PulseSpec::Custom { file: Some(f), .. } = p {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "scenario id `{}` must be a plain file stem",
                self.id
            )));
        }
        let m = &self.medium;
        if m.gamma_s.is_some() && m.gamma_s_per_us.is_some() {
            return Err(Error::Config(
                "give either medium.gamma_s or medium.gamma_s_per_us, not both".into(),
            ));
        }
        let p = &self.protocol;
        if p.storage_time.is_some() && p.storage_time_us.is_some() {
            return Err(Error::Config(
                "give either protocol.storage_time or protocol.storage_time_us, not both".into(),
            ));
        }
        for (name, v) in [
            ("write_window", p.write_window),
            ("read_window", p.read_window),
            ("omega_max", p.omega_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("protocol.{name} must be positive, got {v}")));
            }
        }
        let g = &self.grid;
        if !(g.dt > 0.0) || g.dt > 0.1 * p.write_window.min(p.read_window) {
            return Err(Error::invalid(format!(
                "grid.dt = {} must be positive and at most a tenth of each window",
                g.dt
            )));
        }
        if g.n_z < 2 {
            return Err(Error::invalid(format!("grid.n_z must be >= 2, got {}", g.n_z)));
        }
        self.medium()?;
        let tau = self.storage_time()?;
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("storage time must be >= 0, got {tau}")));
        }
        Ok(())
    }

    pub fn medium(&self) -> Result<MediumParams> {
        let m = &self.medium;
        let base = MediumParams::new(m.alpha_l, m.gamma, 0.0, m.delta)?;
        let gamma_s = match (m.gamma_s, m.gamma_s_per_us) {
            (Some(g), _) => g,
            (None, Some(per_us)) => per_us * 1e6,
            (None, None) => 0.0,
        };
        MediumParams::new(m.alpha_l, base.gamma(), gamma_s, m.delta)
    }

    /// Dark storage time in units of 1/gamma.
    pub fn storage_time(&self) -> Result<f64> {
        let p = &self.protocol;
        Ok(match (p.storage_time, p.storage_time_us) {
            (Some(t), _) => t,
            (None, Some(us)) => self.medium()?.time_from_us(us),
            (None, None) => 0.0,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.validate()?;
        let medium = self.medium()?;
        let tau = self.storage_time()?;
        let p = &self.protocol;
        let write_grid = TimeGrid::with_spacing(-p.write_window, 0.0, self.grid.dt)?;
        let read_grid = TimeGrid::with_spacing(tau, tau + p.read_window, self.grid.dt)?;
        let (input, _) = self.input.build(&write_grid)?;
        let (target, bins) = self.target.build(&read_grid)?;
        Ok(ResolvedScenario {
            medium,
            tau,
            write_grid,
            read_grid,
            input,
            target,
            bins,
            solver: SolverOptions {
                n_z: self.grid.n_z,
                ..Default::default()
            },
            omega_max: p.omega_max,
            refine_passes: p.refine_passes,
        })
    }

    /// Sets a numeric field by name, as used by sweeps and command-line overrides.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "alpha_l" | "alphaL" => self.medium.alpha_l = value,
            "gamma" => self.medium.gamma = value,
            "gamma_s" => {
                self.medium.gamma_s = Some(value);
                self.medium.gamma_s_per_us = None;
            }
            "gamma_s_per_us" => {
                self.medium.gamma_s_per_us = Some(value);
                self.medium.gamma_s = None;
            }
            "delta" => self.medium.delta = value,
            "storage_time" | "tau" => {
                self.protocol.storage_time = Some(value);
                self.protocol.storage_time_us = None;
            }
            "storage_time_us" | "tau_us" => {
                self.protocol.storage_time_us = Some(value);
                self.protocol.storage_time = None;
            }
            "write_window" => self.protocol.write_window = value,
            "read_window" => self.protocol.read_window = value,
            "omega_max" => self.protocol.omega_max = value,
            "refine_passes" => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::invalid(format!(
                        "refine_passes must be a non-negative integer, got {value}"
                    )));
                }
                self.protocol.refine_passes = value as usize;
            }
            "dt" => self.grid.dt = value,
            "n_z" => {
                if !(value >= 2.0 && value.fract() == 0.0) {
                    return Err(Error::invalid(format!("n_z must be an integer >= 2, got {value}")));
                }
                self.grid.n_z = value as usize;
            }
            other => return Err(Error::UnknownParameter(other.into())),
        }
        Ok(())
    }

    pub const PARAMETERS: [&'static str; 13] = [
        "alpha_l",
        "gamma",
        "gamma_s",
        "gamma_s_per_us",
        "delta",
        "storage_time",
        "storage_time_us",
        "write_window",
        "read_window",
        "omega_max",
        "refine_passes",
        "dt",
        "n_z",
    ];
}

/// Outcome of one scenario. `wall_time` is never written to files.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub id: String,
    pub alpha_l: f64,
    pub gamma_s_tau: f64,
    pub metrics: MetricsReport,
    pub eta_max: f64,
    /// Spin-wave energy after writing, per unit input energy.
    pub store_efficiency: f64,
    /// Forward-retrieval efficiency of the stored spin-wave shape.
    pub eta_r: f64,
    pub leak_energy: f64,
    pub balance_write: f64,
    pub balance_read: f64,
    pub grid: GridSpec,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunSummary {
    pub fn summary_row(&self) -> Vec<String> {
        let bins = self.metrics.bins.as_ref();
        vec![
            self.id.clone(),
            io::fmt(self.alpha_l),
            io::fmt(self.gamma_s_tau),
            io::fmt(self.metrics.eta),
            io::fmt(self.metrics.j2),
            io::fmt(self.metrics.fidelity),
            io::fmt(self.metrics.hom_coincidence),
            io::fmt(self.eta_max),
            io::fmt(self.store_efficiency),
            io::fmt(self.eta_r),
            io::fmt(self.leak_energy),
            io::fmt(self.balance_write),
            io::fmt(self.balance_read),
            bins.map(|b| io::fmt(b.j2_bins)).unwrap_or_default(),
            bins.map(|b| io::fmt(b.ratio)).unwrap_or_default(),
            self.warnings.join("; "),
        ]
    }
}

/// Writes (or appends) one summary row per run.
pub fn write_summary(path: &Path, runs: &[RunSummary], overwrite: bool) -> Result<()> {
    let rows: Vec<Vec<String>> = runs.iter().map(RunSummary::summary_row).collect();
    io::append_rows(path, &SUMMARY_HEADER, &rows, overwrite)
}

/// Collects emitted paths so a failed run can remove what it already wrote.
struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn path(&mut self, name: String) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn discard(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
    }
}

/// `(alpha_l, delta, n_z, dt, t_window)` as bit patterns.
type ModeKey = (u64, u64, usize, u64, u64);

fn mode_cache() -> &'static Mutex<HashMap<ModeKey, Arc<OptimalModeResult>>> {
    static CACHE: OnceLock<Mutex<HashMap<ModeKey, Arc<OptimalModeResult>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Optimal mode for the scenario's medium and grids, memoized per process.
pub fn cached_optimal_mode(
    medium: &MediumParams,
    n_z: usize,
    dt: f64,
    t_window: f64,
) -> Result<Arc<OptimalModeResult>> {
    let key = (
        medium.alpha_l().to_bits(),
        medium.delta().to_bits(),
        n_z,
        dt.to_bits(),
        t_window.to_bits(),
    );
    if let Some(hit) = mode_cache().lock().expect("mode cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let cfg = OptimalModeConfig {
        t_window,
        dt,
        solver: SolverOptions {
            n_z,
            ..Default::default()
        },
        ..Default::default()
    };
    let result = Arc::new(optimal_mode(medium, &cfg)?);
    mode_cache()
        .lock()
        .expect("mode cache poisoned")
        .insert(key, result.clone());
    Ok(result)
}

/// Writing stage and dark storage shared by full and partial retrieval.
struct Written {
    r: ResolvedScenario,
    mode: Arc<OptimalModeResult>,
    write_ctrl: Envelope,
    write_report: ShapingReport,
    write_rec: StageRecord,
    stored: SpinWave,
    warnings: Vec<String>,
}

fn write_and_store(spec: &ScenarioSpec) -> Result<Written> {
    let r = spec.resolve()?;
    let mode = cached_optimal_mode(&r.medium, r.solver.n_z, spec.grid.dt, spec.protocol.write_window)?;
    let umode = universal_retrieval_mode(&r.medium, &mode.mode, &UniversalModeOptions::default())?;
    let writing = writing_control_for_mode(umode, &r.input, r.omega_max)?;
    let mut warnings = Vec::new();
    if writing.clock.cap_saturated {
        warnings.push(format!("writing control saturated at omega_max = {}", r.omega_max));
    }
    let empty = SpinWave::zeros(r.solver.space()?);
    let write_rec = propagate_stage(&r.medium, &writing.control, &empty, Some(&r.input), &r.solver)?;
    let stored = dark_storage(&write_rec.final_spin, r.tau, r.medium.gamma_s_dimless())?;
    Ok(Written {
        write_report: writing.report(),
        write_ctrl: writing.control,
        r,
        mode,
        write_rec,
        stored,
        warnings,
    })
}

#[derive(Serialize)]
struct ShapingFile<'a> {
    writing: &'a ShapingReport,
    retrieval: &'a ShapingReport,
}

/// Full pipeline: optimal mode, writing control, storage, dark storage, shaped retrieval, metrics.
///
/// Files go to `spec.output.dir` as `<id>_write.csv`, `<id>_read.csv` (stage
/// time series), `<id>_spin.csv` (stored spin wave), `<id>_mode.csv` (optimal
/// mode), `<id>_shaping.json` and `<id>_metrics.json`. On error nothing is left behind.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunSummary> {
    let mut em = Emitter::new(&spec.output.dir);
    let out = run_inner(spec, &mut em);
    if out.is_err() {
        em.discard();
    }
    out.map_err(|e| e.in_scenario(&spec.id))
}

fn run_inner(spec: &ScenarioSpec, em: &mut Emitter) -> Result<RunSummary> {
    let start = Instant::now();
    let w = write_and_store(spec)?;
    let r = &w.r;
    let mut warnings = w.warnings.clone();
    let opts = ShapingOptions {
        omega_max: r.omega_max,
        ..Default::default()
    };
    let mut reading = retrieval_control(&r.medium, &w.stored, &r.target, &opts)?;
    if r.refine_passes > 0 {
        reading = refine_retrieval(
            &r.medium,
            &w.stored,
            reading,
            &r.target,
            r.omega_max,
            &r.solver,
            r.refine_passes,
        )?;
    }
    if reading.clock.cap_saturated {
        warnings.push(format!("retrieval control saturated at omega_max = {}", r.omega_max));
    }
    let read_rec = propagate_stage(&r.medium, &reading.control, &w.stored, None, &r.solver)?;
    let output = &read_rec.out_envelope;

    let mut metrics = MetricsReport::new(efficiency(&r.input, output)?, overlap(output, &r.target)?);
    if let Some(windows) = r.bins {
        metrics.bins = Some(bin_analysis(output, windows)?.summary());
    }
    let id = &spec.id;
    io::write_stage_csv(
        &em.path(format!("{id}_write.csv")),
        &w.write_ctrl,
        Some(&r.input),
        &w.write_rec.out_envelope,
    )?;
    io::write_stage_csv(&em.path(format!("{id}_read.csv")), &reading.control, None, output)?;
    io::write_spin_csv(&em.path(format!("{id}_spin.csv")), &w.write_rec.final_spin)?;
    io::write_spin_csv(&em.path(format!("{id}_mode.csv")), &w.mode.mode)?;
    let read_report = reading.report();
    io::write_json(
        &em.path(format!("{id}_shaping.json")),
        &ShapingFile {
            writing: &w.write_report,
            retrieval: &read_report,
        },
    )?;
    let mut summary = RunSummary {
        id: id.clone(),
        alpha_l: r.medium.alpha_l(),
        gamma_s_tau: r.medium.gamma_s_dimless() * r.tau,
        metrics,
        eta_max: w.mode.eta_max,
        store_efficiency: w.write_rec.final_spin.norm_sqr() / r.input.energy(),
        eta_r: read_report.eta_r,
        leak_energy: w.write_rec.leak_energy,
        balance_write: energy_balance(&w.write_rec),
        balance_read: energy_balance(&read_rec),
        grid: spec.grid,
        warnings,
        files: Vec::new(),
        wall_time: 0.0,
    };
    io::write_json(&em.path(format!("{id}_metrics.json")), &summary)?;
    summary.files = em.files.clone();
    summary.wall_time = start.elapsed().as_secs_f64();
    Ok(summary)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs several scenarios on at most `jobs` threads; results keep the input order.
pub fn run_all(specs: &[ScenarioSpec], jobs: usize) -> Result<Vec<RunSummary>> {
    thread_pool(jobs)?.install(|| specs.par_iter().map(run_scenario).collect())
}

fn value_label(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

/// One run per value of `param`, ids suffixed with `_<param><value>`; writes a fresh `summary.csv`
/// in the base output directory unless `values` is empty.
pub fn run_sweep(base: &ScenarioSpec, param: &str, values: &[f64], jobs: usize) -> Result<Vec<RunSummary>> {
    base.clone().set_param(param, 1.0).or_else(|e| match e {
        Error::UnknownParameter(_) => Err(e),
        _ => Ok(()),
    })?;
    let specs = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            s.set_param(param, v)?;
            s.id = format!("{}_{}{}", base.id, param, value_label(v));
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Ok(Vec::new());
    }
    let runs = run_all(&specs, jobs)?;
    write_summary(&base.output.dir.join("summary.csv"), &runs, true)?;
    Ok(runs)
}

/// Two-stage retrieval: the first stage releases `fraction` of the retrievable energy, the second the rest.
#[derive(Debug, Clone)]
pub struct PartialRetrieval {
    pub first: RunSummary,
    pub second: RunSummary,
    /// Reference single-stage run of the same scenario.
    pub full: RunSummary,
    pub fraction_requested: f64,
    /// First-stage share of the two retrieved energies.
    pub fraction_achieved: f64,
    /// `|E_1 + E_2 - E_full| / E_full`.
    pub energy_sum_error: f64,
}

/// Splits retrieval into a first stage on `[tau, tau + T_r]` and a second on the following window.
///
/// Each stage delivers the target shape; the first is cut at the clock value
/// where `fraction` of the mode energy has left, the second resumes from there
/// with the spin wave the first stage leaves behind.
pub fn partial_retrieve_scenario(spec: &ScenarioSpec, fraction: f64) -> Result<PartialRetrieval> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(
            Error::invalid(format!("retrieval fraction must lie in (0, 1), got {fraction}")).in_scenario(&spec.id),
        );
    }
    let full = run_scenario(spec)?;
    let mut em = Emitter::new(&spec.output.dir);
    let out = partial_inner(spec, fraction, &mut em, full);
    if out.is_err() {
        em.discard();
    }
    out.map_err(|e| e.in_scenario(&spec.id))
}

fn partial_inner(spec: &ScenarioSpec, fraction: f64, em: &mut Emitter, full: RunSummary) -> Result<PartialRetrieval> {
    let w = write_and_store(spec)?;
    let r = &w.r;
    let mode = universal_retrieval_mode(&r.medium, &w.stored, &UniversalModeOptions::default())?;
    let total = mode.cumulative_at(mode.u_max());
    let u_split = mode.clock_for_energy(fraction * total);

    let ein = r.input.energy();
    let mut stages = Vec::new();
    let mut spin = w.stored.clone();
    for (k, range) in [(0.0, u_split), (u_split, mode.u_max())].into_iter().enumerate() {
        let grid = r.read_grid.shifted(k as f64 * spec.protocol.read_window);
        let target = r.target.resampled(&r.read_grid);
        let target = Envelope::new(grid, target.into_samples(), EnvelopeKind::Signal)?;
        let mut warnings = Vec::new();
        let control = if range.1 - range.0 > 1e-12 * mode.u_max() {
            let clock = solve_clock_range(&mode, &target, r.omega_max, range)?;
            let mut shaped = ShapedControl {
                control: clock.omega.clone(),
                clock,
                mode: mode.clone(),
                clock_mismatch: Vec::new(),
            };
            if r.refine_passes > 0 {
                shaped = refine_retrieval(
                    &r.medium,
                    &spin,
                    shaped,
                    &target,
                    r.omega_max,
                    &r.solver,
                    r.refine_passes,
                )?;
            }
            if shaped.clock.cap_saturated {
                warnings.push(format!(
                    "stage {} control saturated at omega_max = {}",
                    k + 1,
                    r.omega_max
                ));
            }
            shaped.control
        } else {
            Envelope::zeros(grid, EnvelopeKind::Control)
        };
        let rec = propagate_stage(&r.medium, &control, &spin, None, &r.solver)?;
        let out = rec.out_envelope.clone();
        let j2 = if out.energy() > 0.0 {
            overlap(&out, &target)?
        } else {
            0.0
        };
        let id = format!("{}_partial{}", spec.id, k + 1);
        io::write_stage_csv(&em.path(format!("{id}.csv")), &control, None, &out)?;
        stages.push(RunSummary {
            id,
            alpha_l: r.medium.alpha_l(),
            gamma_s_tau: r.medium.gamma_s_dimless() * r.tau,
            metrics: MetricsReport::new(out.energy() / ein, j2),
            eta_max: w.mode.eta_max,
            store_efficiency: w.write_rec.final_spin.norm_sqr() / ein,
            eta_r: (mode.cumulative_at(range.1) - mode.cumulative_at(range.0)) * mode.source_energy,
            leak_energy: w.write_rec.leak_energy,
            balance_write: energy_balance(&w.write_rec),
            balance_read: energy_balance(&rec),
            grid: spec.grid,
            warnings,
            files: vec![em.files[em.files.len() - 1].clone()],
            wall_time: 0.0,
        });
        spin = rec.final_spin;
    }
    let second = stages.pop().expect("two stages");
    let first = stages.pop().expect("two stages");
    let (e1, e2) = (first.metrics.eta, second.metrics.eta);
    let e_full = full.metrics.eta;
    Ok(PartialRetrieval {
        fraction_requested: fraction,
        fraction_achieved: e1 / (e1 + e2),
        energy_sum_error: ((e1 + e2) - e_full).abs() / e_full,
        first,
        second,
        full,
    })
}

/// Data sets mirroring the three experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Positive ramp stored and retrieved as itself, with spin decay during storage.
    Fig1,
    /// Gaussian and negative-ramp inputs, each retrieved into both shapes.
    Fig2,
    /// Gaussian and ramp inputs retrieved into time-bin pulses of varying amplitude ratio.
    Fig3,
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            other => Err(Error::Config(format!("unknown figure `{other}` (fig1, fig2, fig3)"))),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        }
    }
}

pub const FIG3_THETAS: [f64; 5] = [PI / 8.0, PI / 6.0, PI / 4.0, PI / 3.0, 3.0 * PI / 8.0];

/// `alpha_l = 24`, spin decay time `1/(2 gamma_s) = 500 us`, 100 us of dark storage.
fn experiment(id: String, input: PulseSpec, target: PulseSpec, out_dir: &Path) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(&id, 24.0, input, target);
    s.medium.gamma_s_per_us = Some(1e-3);
    s.protocol.storage_time_us = Some(100.0);
    s.output.dir = out_dir.to_path_buf();
    s
}

pub fn figure_specs(fig: Figure, thetas: Option<&[f64]>, out_dir: &Path) -> Vec<ScenarioSpec> {
    use RampSign::*;
    match fig {
        Figure::Fig1 => vec![experiment(
            "fig1".into(),
            PulseSpec::ramp(Positive),
            PulseSpec::ramp(Positive),
            out_dir,
        )],
        Figure::Fig2 => {
            let shapes = [PulseSpec::gaussian(), PulseSpec::ramp(Negative)];
            let mut v = Vec::new();
            for a in &shapes {
                for b in &shapes {
                    let id = format!("fig2_{}_to_{}", a.label(), b.label());
                    v.push(experiment(id, a.clone(), b.clone(), out_dir));
                }
            }
            v
        }
        Figure::Fig3 => {
            let thetas = thetas.unwrap_or(&FIG3_THETAS);
            let mut v = Vec::new();
            for input in [PulseSpec::gaussian(), PulseSpec::ramp(Positive)] {
                for (k, &th) in thetas.iter().enumerate() {
                    let id = format!("fig3_{}_theta{}", input.label(), k);
                    v.push(experiment(id, input.clone(), PulseSpec::time_bin(th, 0.0), out_dir));
                }
            }
            v
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub pass: bool,
}

impl Check {
    fn at_least(name: String, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            requirement: format!(">= {bound}"),
            pass: value >= bound,
        }
    }

    fn at_most(name: String, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            requirement: format!("<= {bound}"),
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproReport {
    pub figure: String,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub runs: Vec<RunSummary>,
}

impl ReproReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs a figure's scenarios, writes a fresh `summary.csv` and `<fig>_checks.json`, and evaluates its thresholds.
pub fn reproduce(fig: Figure, thetas: Option<&[f64]>, out_dir: &Path, jobs: usize) -> Result<ReproReport> {
    let specs = figure_specs(fig, thetas, out_dir);
    if specs.is_empty() {
        return Err(Error::invalid("no scenarios to run"));
    }
    let runs = run_all(&specs, jobs)?;
    let mut checks = Vec::new();
    for (run, spec) in runs.iter().zip(&specs) {
        let m = &run.metrics;
        match fig {
            Figure::Fig1 => {
                checks.push(Check::at_most(
                    format!("{}: |eta - 0.45|", run.id),
                    (m.eta - 0.45).abs(),
                    0.02,
                ));
                checks.push(Check::at_least(format!("{}: J2", run.id), m.j2, 0.98));
            }
            Figure::Fig2 => checks.push(Check::at_least(format!("{}: J2", run.id), m.j2, 0.98)),
            Figure::Fig3 => {
                checks.push(Check::at_least(format!("{}: J2", run.id), m.j2, 0.97));
                if let (Some(b), PulseSpec::TimeBin { theta, .. }) = (&m.bins, &spec.target) {
                    checks.push(Check::at_least(format!("{}: J2(g1, g2)", run.id), b.j2_bins, 0.94));
                    let expect = theta.tan().powi(2);
                    checks.push(Check::at_most(
                        format!("{}: |ratio / tan^2 theta - 1|", run.id),
                        (b.ratio / expect - 1.0).abs(),
                        0.05,
                    ));
                }
            }
        }
        for w in &run.warnings {
            checks.push(Check {
                name: format!("{}: warning", run.id),
                value: f64::NAN,
                requirement: w.clone(),
                pass: false,
            });
        }
    }
    if fig == Figure::Fig2 {
        let etas: Vec<f64> = runs.iter().map(|r| r.metrics.eta).collect();
        let spread = etas.iter().copied().fold(f64::MIN, f64::max) - etas.iter().copied().fold(f64::MAX, f64::min);
        checks.push(Check::at_most("fig2: efficiency spread".into(), spread, 0.01));
    }
    write_summary(&out_dir.join("summary.csv"), &runs, true)?;
    let report = ReproReport {
        figure: fig.name().into(),
        checks,
        runs,
    };
    io::write_json(&out_dir.join(format!("{}_checks.json", fig.name())), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[medium]
alpha_l = 24.0
[input]
shape = "gaussian"
[target]
shape = "ramp_pos"
"#;

    #[test]
    fn minimal_spec_takes_defaults() {
        let s = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.id, "scenario");
        assert_eq!(s.grid, GridSpec { dt: 0.02, n_z: 200 });
        assert_eq!(s.protocol.write_window, 50.0);
        assert_eq!(s.storage_time().unwrap(), 0.0);
        assert_eq!(s.input, PulseSpec::gaussian());
        let r = s.resolve().unwrap();
        assert_eq!(r.write_grid.n_steps(), 2500);
        assert!((r.input.energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn toml_round_trip() {
        let mut s = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        s.target = PulseSpec::time_bin(0.5, 0.25);
        s.medium.gamma_s_per_us = Some(1e-3);
        let back = ScenarioSpec::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn required_and_unknown_fields() {
        assert!(matches!(
            ScenarioSpec::from_toml_str("[input]\nshape = \"gaussian\""),
            Err(Error::Config(_))
        ));
        let typo = MINIMAL.replace("alpha_l = 24.0", "alpha_l = 24.0\nalpah = 1");
        assert!(matches!(ScenarioSpec::from_toml_str(&typo), Err(Error::Config(_))));
        let bad_shape = MINIMAL.replace("ramp_pos", "square");
        assert!(matches!(ScenarioSpec::from_toml_str(&bad_shape), Err(Error::Config(_))));
        let extra = MINIMAL.replace("shape = \"gaussian\"", "shape = \"gaussian\"\nwidth = 3.0");
        assert!(matches!(ScenarioSpec::from_toml_str(&extra), Err(Error::Config(_))));
        let alias = MINIMAL.replace("alpha_l", "alphaL");
        assert_eq!(ScenarioSpec::from_toml_str(&alias).unwrap().medium.alpha_l, 24.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let neg = MINIMAL.replace("24.0", "-1.0");
        assert!(ScenarioSpec::from_toml_str(&neg).is_err());
        let both = format!("{MINIMAL}[protocol]\nstorage_time = 1.0\nstorage_time_us = 1.0\n");
        assert!(ScenarioSpec::from_toml_str(&both).is_err());
        let coarse = format!("{MINIMAL}[grid]\ndt = 10.0\n");
        assert!(ScenarioSpec::from_toml_str(&coarse).is_err());
        let tau = format!("{MINIMAL}[protocol]\nstorage_time = -3.0\n");
        assert!(ScenarioSpec::from_toml_str(&tau).is_err());
    }

    #[test]
    fn physical_units_convert() {
        let mut s = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        s.set_param("gamma_s_per_us", 1e-3).unwrap();
        s.set_param("storage_time_us", 100.0).unwrap();
        let m = s.medium().unwrap();
        assert!((m.gamma_s_dimless() * s.storage_time().unwrap() - 0.1).abs() < 1e-12);
        s.set_param("gamma_s", 1e3).unwrap();
        assert!((s.medium().unwrap().gamma_s_dimless() - 1e-6).abs() < 1e-18);
        assert!(matches!(s.set_param("colour", 1.0), Err(Error::UnknownParameter(_))));
        assert!(s.set_param("n_z", 2.5).is_err());
    }

    #[test]
    fn pulses_are_placed_in_their_windows() {
        let g = TimeGrid::with_spacing(100.0, 150.0, 0.02).unwrap();
        let (e, _) = PulseSpec::Gaussian {
            sigma: 3.0,
            center: Some(10.0),
        }
        .build(&g)
        .unwrap();
        let peak = e
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert!((g.time(peak) - 110.0).abs() < 1e-9);
        let (_, bins) = PulseSpec::time_bin(0.3, 0.0).build(&g).unwrap();
        let [(a0, b0), (a1, b1)] = bins.unwrap();
        assert!(a0 >= 100.0 && b0 <= a1 && b1 <= 150.0);
        let custom = PulseSpec::Custom {
            file: None,
            amplitudes: Some(vec![0.0, 1.0, 0.0]),
        };
        let (c, _) = custom.build(&g).unwrap();
        assert!((c.energy() - 1.0).abs() < 1e-9);
        assert!((c.value_at(125.0).norm() - c.peak_abs()).abs() < 1e-12);
        let empty = PulseSpec::Custom {
            file: None,
            amplitudes: None,
        };
        assert!(empty.build(&g).is_err());
    }

    #[test]
    fn figure_sets() {
        let dir = Path::new("x");
        assert_eq!(figure_specs(Figure::Fig1, None, dir).len(), 1);
        assert_eq!(figure_specs(Figure::Fig2, None, dir).len(), 4);
        assert_eq!(figure_specs(Figure::Fig3, None, dir).len(), 10);
        assert_eq!(figure_specs(Figure::Fig3, Some(&[0.3]), dir).len(), 2);
        let f1 = &figure_specs(Figure::Fig1, None, dir)[0];
        let g = f1.medium().unwrap().gamma_s_dimless() * f1.storage_time().unwrap();
        assert!((g - 0.1).abs() < 1e-12);
        assert!("fig4".parse::<Figure>().is_err());
    }
}
