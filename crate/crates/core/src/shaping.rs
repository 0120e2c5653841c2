//! Control-field synthesis in the resonant adiabatic limit.
//!
//! Eliminating the polarization adiabatically and changing variables to the
//! clock `u(t) = int Omega^2 dt'` and `F = E / Omega` turns retrieval into the
//! control-free system
//!
//! ```text
//! dF/dz = -d F - sqrt(d) S,        F(z = 0, u) = input
//! dS/du = -S - sqrt(d) F
//! ```
//!
//! Its output `q(u) = F(1, u)` (the [`UniversalMode`]) is fixed by the spin
//! wave alone. A retrieval control then only chooses how fast the clock runs:
//! `|E_out(t)|^2 = (dh/dt) |q(h)|^2`, which [`solve_clock`] inverts for any
//! target shape. Writing controls follow from time reversal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, EnvelopeKind, SpinWave};
use crate::error::{Error, Result};
use crate::grid::{cumtrapz, trapz, SpaceGrid};
use crate::medium::MediumParams;
use crate::metrics::overlap;
use crate::solver::{propagate_stage, SolverOptions};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default control magnitude cap, units of gamma.
pub const DEFAULT_OMEGA_MAX: f64 = 10.0;
/// Default fraction of the retrievable energy allowed beyond `U_max`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-3;

/// Space-marching and clock-stepping of the adiabatic (control-free) equations.
#[derive(Debug, Clone)]
pub struct AdiabaticPropagator {
    space: SpaceGrid,
    sqrt_d: f64,
    decay: f64,
    w_prev: f64,
    w_cur: f64,
}

impl AdiabaticPropagator {
    pub fn new(d: f64, space: SpaceGrid) -> Self {
        let h = space.dz();
        let x = d * h;
        // exact integration of dF/dz = -d F - sqrt(d) S for S linear on each cell
        let (i0, i1) = if x < 1e-4 {
            (h * (1.0 - x / 2.0 + x * x / 6.0), h * (0.5 - x / 6.0 + x * x / 24.0))
        } else {
            let ex = (-x).exp();
            let i0 = (1.0 - ex) / d;
            (i0, i0 - (1.0 - ex * (1.0 + x)) / (d * d * h))
        };
        Self {
            space,
            sqrt_d: d.sqrt(),
            decay: (-x).exp(),
            w_prev: i0 - i1,
            w_cur: i1,
        }
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    /// Fills `out` with `F(z)` for the spin profile `s` and boundary value `f0`.
    pub fn field(&self, s: &[Complex64], f0: Complex64, out: &mut [Complex64]) {
        out[0] = f0;
        for k in 1..s.len() {
            out[k] = out[k - 1] * self.decay - (s[k - 1] * self.w_prev + s[k] * self.w_cur) * self.sqrt_d;
        }
    }

    fn rate(&self, s: &[Complex64], f0: Complex64, ds: &mut [Complex64], f: &mut [Complex64]) {
        self.field(s, f0, f);
        for k in 0..s.len() {
            ds[k] = -s[k] - f[k] * self.sqrt_d;
        }
    }

    /// One RK4 clock step with boundary input sampled at `u`, `u + du/2`, `u + du`.
    pub fn step(&self, s: &mut [Complex64], inputs: [Complex64; 3], du: f64, scratch: &mut Scratch) {
        let n = s.len();
        scratch.ensure(n);
        let Scratch { k1, k2, k3, k4, tmp, f } = scratch;
        self.rate(s, inputs[0], k1, f);
        for k in 0..n {
            tmp[k] = s[k] + k1[k] * (0.5 * du);
        }
        self.rate(tmp, inputs[1], k2, f);
        for k in 0..n {
            tmp[k] = s[k] + k2[k] * (0.5 * du);
        }
        self.rate(tmp, inputs[1], k3, f);
        for k in 0..n {
            tmp[k] = s[k] + k3[k] * du;
        }
        self.rate(tmp, inputs[2], k4, f);
        for k in 0..n {
            s[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (du / 6.0);
        }
    }

    /// Output `F(1)` for spin `s` and boundary value `f0`.
    pub fn output(&self, s: &[Complex64], f0: Complex64, scratch: &mut Scratch) -> Complex64 {
        scratch.ensure(s.len());
        self.field(s, f0, &mut scratch.f);
        scratch.f[s.len() - 1]
    }

    pub fn excitation(&self, s: &[Complex64]) -> f64 {
        let v: Vec<f64> = s.iter().map(|x| x.norm_sqr()).collect();
        trapz(&v, self.space.dz())
    }

    /// Adiabatic writing: feeds `input(u)` at `z = 0` from `u = 0` to `u_end`, starting from an empty medium.
    pub fn store(&self, input: impl Fn(f64) -> Complex64, u_start: f64, u_end: f64, du: f64) -> Vec<Complex64> {
        let mut s = vec![ZERO; self.space.n_z()];
        let mut scratch = Scratch::default();
        let steps = ((u_end - u_start) / du - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return s;
        }
        let h = (u_end - u_start) / steps as f64;
        for j in 0..steps {
            let u = u_start + j as f64 * h;
            self.step(&mut s, [input(u), input(u + 0.5 * h), input(u + h)], h, &mut scratch);
        }
        s
    }
}

#[derive(Debug, Default, Clone)]
pub struct Scratch {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
    f: Vec<Complex64>,
}

impl Scratch {
    fn ensure(&mut self, n: usize) {
        if self.f.len() != n {
            for v in [
                &mut self.k1,
                &mut self.k2,
                &mut self.k3,
                &mut self.k4,
                &mut self.tmp,
                &mut self.f,
            ] {
                v.resize(n, ZERO);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalModeOptions {
    /// Fixed clock horizon; `None` picks the shortest one meeting the tail tolerance.
    pub u_max: Option<f64>,
    pub du: f64,
    pub tail_tolerance: f64,
}

impl Default for UniversalModeOptions {
    fn default() -> Self {
        Self {
            u_max: None,
            du: 0.005,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

/// Control-independent retrieval output of a spin wave, as a function of the clock `u`.
#[derive(Debug, Clone)]
pub struct UniversalMode {
    du: f64,
    /// `q(u_j)` with its global phase removed (real and positive at its peak).
    q: Vec<Complex64>,
    cumulative: Vec<f64>,
    /// Global phase stripped from `q`; the physical output is `output_phase * Omega * q`.
    pub output_phase: Complex64,
    /// `int_0^{U_max} |q|^2 du`.
    pub eta_r: f64,
    /// Retrievable energy left beyond `U_max`.
    pub tail_energy: f64,
    /// Unit-norm spin wave the mode was computed from.
    pub source_mode: SpinWave,
    /// Norm `int |S|^2 dz` of the spin wave before normalization.
    pub source_energy: f64,
}

impl UniversalMode {
    pub fn u_max(&self) -> f64 {
        self.du * (self.q.len() - 1) as f64
    }

    pub fn du(&self) -> f64 {
        self.du
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn u(&self, j: usize) -> f64 {
        j as f64 * self.du
    }

    pub fn q_at(&self, u: f64) -> Complex64 {
        let (j, f) = self.locate(u);
        self.q[j] * (1.0 - f) + self.q[j + 1] * f
    }

    /// `Q(u) = int_0^u |q|^2`.
    pub fn cumulative_at(&self, u: f64) -> f64 {
        let (j, f) = self.locate(u);
        self.cumulative[j] * (1.0 - f) + self.cumulative[j + 1] * f
    }

    /// Smallest `u` with `Q(u) = energy` (clamped to `[0, U_max]`).
    pub fn clock_for_energy(&self, energy: f64) -> f64 {
        let c = &self.cumulative;
        if energy <= c[0] {
            return 0.0;
        }
        if energy >= c[c.len() - 1] {
            return self.u_max();
        }
        let j = c.partition_point(|&x| x < energy);
        let (a, b) = (c[j - 1], c[j]);
        let f = if b > a { (energy - a) / (b - a) } else { 0.0 };
        self.du * ((j - 1) as f64 + f)
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let last = self.q.len() - 1;
        let x = (u / self.du).clamp(0.0, last as f64);
        let j = (x.floor() as usize).min(last.saturating_sub(1));
        (j, x - j as f64)
    }

    fn q_peak_sqr(&self) -> f64 {
        self.q.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max)
    }
}

/// Integrates the control-free retrieval system from `spin` (normalized internally).
pub fn universal_retrieval_mode(
    medium: &MediumParams,
    spin: &SpinWave,
    opts: &UniversalModeOptions,
) -> Result<UniversalMode> {
    if medium.delta() != 0.0 {
        return Err(Error::invalid("control shaping is implemented for resonant media only"));
    }
    if !(opts.du > 0.0) || !(opts.tail_tolerance > 0.0) {
        return Err(Error::invalid("clock step and tail tolerance must be positive"));
    }
    if let Some(u) = opts.u_max {
        if !(u > 0.0) {
            return Err(Error::invalid(format!("U_max must be > 0, got {u}")));
        }
    }
    let source = spin.normalized()?;
    let d = medium.d();
    let prop = AdiabaticPropagator::new(d, *source.grid());
    let mut scratch = Scratch::default();
    let mut s = source.samples().to_vec();
    let du = opts.du;
    let u_limit = opts.u_max.unwrap_or(0.0).max(60.0 + 20.0 * d);
    let store_until = opts.u_max.map(|u| (u / du).round() as usize);

    let mut q = vec![prop.output(&s, ZERO, &mut scratch)];
    let mut beyond = Vec::new();
    let mut j = 0usize;
    loop {
        let stored = store_until.is_none_or(|n| j < n);
        let exc = prop.excitation(&s);
        if !stored && exc < 1e-14 {
            break;
        }
        if store_until.is_none() && exc < 1e-14 {
            break;
        }
        if j as f64 * du > u_limit {
            break;
        }
        prop.step(&mut s, [ZERO; 3], du, &mut scratch);
        j += 1;
        let out = prop.output(&s, ZERO, &mut scratch);
        if store_until.is_none_or(|n| j <= n) {
            q.push(out);
        } else {
            beyond.push(out);
        }
    }

    let q2: Vec<f64> = q.iter().map(|x| x.norm_sqr()).collect();
    let mut cumulative = cumtrapz(&q2, du);
    let (q, tail_energy) = match opts.u_max {
        Some(_) => {
            let mut tail_samples = vec![q2[q2.len() - 1]];
            tail_samples.extend(beyond.iter().map(|x| x.norm_sqr()));
            (q, trapz(&tail_samples, du))
        }
        None => {
            let total = cumulative[cumulative.len() - 1];
            let min_len = ((1.0 / du).ceil() as usize + 1).min(q.len());
            let cut = cumulative
                .iter()
                .position(|&c| total - c <= opts.tail_tolerance * total)
                .unwrap_or(q.len() - 1)
                .max(min_len - 1);
            cumulative.truncate(cut + 1);
            let mut q = q;
            q.truncate(cut + 1);
            (q, total - cumulative[cut])
        }
    };
    let eta_r = cumulative[cumulative.len() - 1];
    if opts.u_max.is_some() && tail_energy > opts.tail_tolerance * eta_r && eta_r > 0.0 {
        return Err(Error::TailTooLarge {
            tail: tail_energy,
            u_max: du * (q.len() - 1) as f64,
            tolerance: opts.tail_tolerance * eta_r,
        });
    }
    let peak = q
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(ZERO);
    let output_phase = if peak.norm() > 0.0 {
        peak / peak.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let q = q.into_iter().map(|x| x * output_phase.conj()).collect();
    Ok(UniversalMode {
        du,
        q,
        cumulative,
        output_phase,
        eta_r,
        tail_energy,
        source_mode: source,
        source_energy: spin.norm_sqr(),
    })
}

/// Clock `h(t)` and the control `Omega(t) = sqrt(dh/dt) * phase` realizing it.
#[derive(Debug, Clone)]
pub struct ClockSolution {
    pub h: Vec<f64>,
    pub omega: Envelope,
    pub cap_saturated: bool,
    /// Adiabatic prediction of the retrieved field under `omega`.
    pub predicted_output: Envelope,
    pub predicted_j2: f64,
    pub clock_range: (f64, f64),
}

/// Clock over the whole mode, `[0, U_max]`.
pub fn solve_clock(mode: &UniversalMode, target: &Envelope, omega_max: f64) -> Result<ClockSolution> {
    solve_clock_range(mode, target, omega_max, (0.0, mode.u_max()))
}

/// Runs the clock from `u_a` to `u_b`, delivering the mode energy `Q(u_b) - Q(u_a)` in the target's shape.
///
/// The ideal clock solves `dh/dt = eps(t) / |q(h)|^2` with `eps` the target
/// intensity rescaled to the delivered energy; it is obtained by inverting the
/// cumulative energies. When the ideal rate exceeds `omega_max^2` the rate is
/// clamped and the clock is re-integrated, so the returned control is what the
/// cap allows and `cap_saturated` is set.
pub fn solve_clock_range(
    mode: &UniversalMode,
    target: &Envelope,
    omega_max: f64,
    (u_a, u_b): (f64, f64),
) -> Result<ClockSolution> {
    if !(omega_max > 0.0) {
        return Err(Error::invalid(format!("omega_max must be > 0, got {omega_max}")));
    }
    if !(0.0 <= u_a && u_a < u_b && u_b <= mode.u_max() + 1e-12) {
        return Err(Error::invalid(format!(
            "clock range [{u_a}, {u_b}] not inside [0, {}]",
            mode.u_max()
        )));
    }
    let grid = *target.grid();
    let dt = grid.dt();
    let eps_raw = target.intensities();
    let target_energy = trapz(&eps_raw, dt);
    if !(target_energy > 0.0) || !target_energy.is_finite() {
        return Err(Error::invalid("target must have finite nonzero energy"));
    }
    let q_start = mode.cumulative_at(u_a);
    let deliver = mode.cumulative_at(u_b) - q_start;
    if !(deliver > 0.0) {
        return Err(Error::InfeasibleTarget {
            time: grid.t_start(),
            clock: u_a,
        });
    }
    let scale = deliver / target_energy;
    let eps: Vec<f64> = eps_raw.iter().map(|x| x * scale).collect();
    let eps_peak = eps.iter().copied().fold(0.0, f64::max);
    let q_floor = 1e-14 * mode.q_peak_sqr();
    let cap2 = omega_max * omega_max;

    let cum = cumtrapz(&eps, dt);
    let mut h: Vec<f64> = cum
        .iter()
        .map(|c| mode.clock_for_energy(q_start + c).clamp(u_a, u_b))
        .collect();
    let mut rate = Vec::with_capacity(grid.len());
    for (i, (&e, &hh)) in eps.iter().zip(&h).enumerate() {
        if e <= 1e-14 * eps_peak {
            rate.push(0.0);
            continue;
        }
        let q2 = mode.q_at(hh).norm_sqr();
        if q2 <= q_floor {
            return Err(Error::InfeasibleTarget {
                time: grid.time(i),
                clock: hh,
            });
        }
        rate.push(e / q2);
    }

    let cap_saturated = rate.iter().any(|&r| r > cap2);
    if cap_saturated {
        // re-integrate the clock with the rate clamped at the cap
        let rate_at = |t_eps: f64, hh: f64| -> f64 {
            if t_eps <= 1e-14 * eps_peak {
                return 0.0;
            }
            (t_eps / mode.q_at(hh).norm_sqr().max(q_floor)).min(cap2)
        };
        h[0] = u_a;
        for i in 0..grid.n_steps() {
            let (e0, e1) = (eps[i], eps[i + 1]);
            let em = 0.5 * (e0 + e1);
            let k1 = rate_at(e0, h[i]);
            let k2 = rate_at(em, (h[i] + 0.5 * dt * k1).min(u_b));
            let k3 = rate_at(em, (h[i] + 0.5 * dt * k2).min(u_b));
            let k4 = rate_at(e1, (h[i] + dt * k3).min(u_b));
            h[i + 1] = (h[i] + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)).clamp(u_a, u_b);
        }
        for i in 0..grid.len() {
            rate[i] = rate_at(eps[i], h[i]);
        }
    }

    assemble(mode, target, &rate, &h, cap_saturated, (u_a, u_b))
}

/// Builds the control from clock rates (phases follow the target and `q(h)`) and its adiabatic prediction.
fn assemble(
    mode: &UniversalMode,
    target: &Envelope,
    rate: &[f64],
    h: &[f64],
    cap_saturated: bool,
    (u_a, u_b): (f64, f64),
) -> Result<ClockSolution> {
    let grid = *target.grid();
    let samples: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let tgt = target.samples()[i];
            let qh = mode.q_at(h[i]);
            let mut phase = if tgt.norm() > 0.0 {
                tgt / tgt.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            if qh.norm() > 0.0 {
                phase *= (qh / qh.norm()).conj();
            }
            phase * rate[i].sqrt()
        })
        .collect();
    let omega = Envelope::new(grid, samples, EnvelopeKind::Control)?;
    let achieved: Vec<f64> = omega.intensities();
    let h: Vec<f64> = cumtrapz(&achieved, grid.dt()).into_iter().map(|x| u_a + x).collect();
    let predicted = Envelope::new(
        grid,
        (0..grid.len())
            .map(|i| mode.output_phase * omega.samples()[i] * mode.q_at(h[i]))
            .collect(),
        EnvelopeKind::Signal,
    )?;
    let predicted_j2 = if predicted.energy() > 0.0 {
        overlap(&predicted, target)?
    } else {
        0.0
    };
    Ok(ClockSolution {
        h,
        omega,
        cap_saturated,
        predicted_output: predicted,
        predicted_j2,
        clock_range: (u_a, u_b),
    })
}

/// Clock values at which the mode has released the cumulative energy of `env`.
///
/// With `scale = None` the energy is normalized to the range's share of the
/// mode; otherwise it is divided by `scale` (the spin-wave norm) and the clock
/// may run past `u_b`.
fn emission_clock(
    mode: &UniversalMode,
    env: &Envelope,
    (u_a, u_b): (f64, f64),
    scale: Option<f64>,
) -> Option<Vec<f64>> {
    let c = cumtrapz(&env.intensities(), env.grid().dt());
    let total = c[c.len() - 1];
    if !(total > 0.0) {
        return None;
    }
    let (qa, qb) = (mode.cumulative_at(u_a), mode.cumulative_at(u_b));
    let per_unit = match scale {
        Some(s) => 1.0 / s,
        None => (qb - qa) / total,
    };
    Some(
        c.iter()
            .map(|x| mode.clock_for_energy(qa + x * per_unit).max(u_a))
            .collect(),
    )
}

/// Corrects a retrieval control for non-adiabatic lag, using the full solver.
///
/// The adiabatic clock assumes the medium follows the control instantly. With
/// finite bandwidth the emission trails the clock and energy slides toward the
/// later part of the target. Each pass retrieves `spin` with the current
/// control, converts the realized cumulative emission (per unit norm of the
/// spin wave the mode was built from) into the clock it corresponds to, and
/// advances the control clock by the deficit. `spin` may be a partly emptied
/// version of that spin wave, as in the second stage of a split retrieval. Passes stop
/// early once the largest clock deficit drops below `1e-5 U_max`. A stage that
/// ends before `U_max` is matched in absolute energy, so its clock may overrun
/// the nominal range; a stage that ends at `U_max` is matched in shape only.
pub fn refine_retrieval(
    medium: &MediumParams,
    spin: &SpinWave,
    shaped: ShapedControl,
    target: &Envelope,
    omega_max: f64,
    solver: &SolverOptions,
    passes: usize,
) -> Result<ShapedControl> {
    let ShapedControl {
        mut control,
        mut clock,
        mode,
        mut clock_mismatch,
    } = shaped;
    if !control.grid().matches(target.grid()) {
        return Err(Error::invalid("refinement target must share the control grid"));
    }
    let range = clock.clock_range;
    // a stage that stops short of U_max must release an absolute amount of energy;
    // one that runs to the end only has to get the shape right
    let scale = (range.1 < mode.u_max()).then_some(mode.source_energy);
    let Some(wanted) = emission_clock(&mode, target, range, None) else {
        return Err(Error::invalid("target must have finite nonzero energy"));
    };
    let cap2 = omega_max * omega_max;
    let grid = *target.grid();
    let dt = grid.dt();
    let n = grid.len();
    let mut h = clock.h.clone();
    for _ in 0..passes {
        let out = propagate_stage(medium, &control, spin, None, solver)?.out_envelope;
        let Some(realized) = emission_clock(&mode, &out, range, scale) else {
            break;
        };
        let worst = wanted
            .iter()
            .zip(&realized)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        clock_mismatch.push(worst);
        if worst < 1e-5 * mode.u_max() {
            break;
        }
        let mut floor = range.0;
        for i in 0..n {
            h[i] = (h[i] + wanted[i] - realized[i]).clamp(range.0, mode.u_max()).max(floor);
            floor = h[i];
        }
        let mut saturated = false;
        let rate: Vec<f64> = (0..n)
            .map(|i| {
                let r = match i {
                    0 => (h[1] - h[0]) / dt,
                    i if i == n - 1 => (h[n - 1] - h[n - 2]) / dt,
                    i => (h[i + 1] - h[i - 1]) / (2.0 * dt),
                };
                if r > cap2 {
                    saturated = true;
                    cap2
                } else {
                    r
                }
            })
            .collect();
        clock = assemble(&mode, target, &rate, &h, saturated, range)?;
        control = clock.omega.clone();
    }
    Ok(ShapedControl {
        control,
        clock,
        mode,
        clock_mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingOptions {
    pub omega_max: f64,
    pub mode: UniversalModeOptions,
}

impl Default for ShapingOptions {
    fn default() -> Self {
        Self {
            omega_max: DEFAULT_OMEGA_MAX,
            mode: UniversalModeOptions::default(),
        }
    }
}

/// A synthesized control together with the construction that produced it.
#[derive(Debug, Clone)]
pub struct ShapedControl {
    pub control: Envelope,
    pub clock: ClockSolution,
    pub mode: UniversalMode,
    /// Largest clock deficit seen by each refinement pass (empty when unrefined).
    pub clock_mismatch: Vec<f64>,
}

/// Summary written next to exported controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingReport {
    pub eta_r: f64,
    pub u_max: f64,
    pub cap_saturated: bool,
    pub tail_energy: f64,
    pub predicted_j2: f64,
    pub peak_omega: f64,
    pub refinement_passes: usize,
}

impl ShapedControl {
    pub fn report(&self) -> ShapingReport {
        ShapingReport {
            eta_r: self.mode.eta_r,
            u_max: self.mode.u_max(),
            cap_saturated: self.clock.cap_saturated,
            tail_energy: self.mode.tail_energy,
            predicted_j2: self.clock.predicted_j2,
            peak_omega: self.control.peak_abs(),
            refinement_passes: self.clock_mismatch.len(),
        }
    }
}

/// Control that retrieves `spin` (forward) into the shape of `target`, on the target's grid.
pub fn retrieval_control(
    medium: &MediumParams,
    spin: &SpinWave,
    target: &Envelope,
    opts: &ShapingOptions,
) -> Result<ShapedControl> {
    let mode = universal_retrieval_mode(medium, spin, &opts.mode)?;
    retrieval_control_for_mode(mode, target, opts.omega_max)
}

pub fn retrieval_control_for_mode(mode: UniversalMode, target: &Envelope, omega_max: f64) -> Result<ShapedControl> {
    let clock = solve_clock(&mode, target, omega_max)?;
    Ok(ShapedControl {
        control: clock.omega.clone(),
        clock,
        mode,
        clock_mismatch: Vec::new(),
    })
}

/// Control that stores `input` into `spin_target`, on the input's grid.
///
/// This is the time reverse of the control that retrieves `spin_target` into
/// the time-reversed input. The mapping is exact (in the adiabatic limit) when
/// `spin_target` is the optimal mode of the medium, i.e. the fixed point of the
/// store / forward-retrieve / time-reverse cycle; the storage efficiency is then
/// `eta_max / eta_r`.
pub fn writing_control(
    medium: &MediumParams,
    input: &Envelope,
    spin_target: &SpinWave,
    opts: &ShapingOptions,
) -> Result<ShapedControl> {
    let mode = universal_retrieval_mode(medium, spin_target, &opts.mode)?;
    writing_control_for_mode(mode, input, opts.omega_max)
}

pub fn writing_control_for_mode(mode: UniversalMode, input: &Envelope, omega_max: f64) -> Result<ShapedControl> {
    if !(input.energy() > 0.0) {
        return Err(Error::invalid("writing control needs an input with nonzero energy"));
    }
    let g = input.grid();
    let pivot = 0.5 * (g.t_start() + g.t_end());
    let reversed = time_reverse(input, pivot);
    let shaped = retrieval_control_for_mode(mode, &reversed, omega_max)?;
    Ok(ShapedControl {
        control: time_reverse(&shaped.control, pivot),
        ..shaped
    })
}

/// `f(t) -> f(2 pivot - t)`; the grid is mirrored about `pivot` as well.
pub fn time_reverse(env: &Envelope, pivot: f64) -> Envelope {
    let g = env.grid();
    let grid = crate::grid::TimeGrid::new(2.0 * pivot - g.t_end(), 2.0 * pivot - g.t_start(), g.n_steps())
        .expect("mirrored grid keeps its ordering");
    let mut samples = env.samples().to_vec();
    samples.reverse();
    Envelope::new(grid, samples, env.kind()).expect("same length")
}
