//! Three-field integrator for the resonant Lambda system in the co-moving frame.
//!
//! Dimensionless equations (time in `1/gamma`, `z` in units of L, `d = alphaL / 2`):
//!
//! ```text
//! dE/dz = i sqrt(d) P
//! dP/dt = -(1 + i delta) P + i sqrt(d) E + i Omega(t) S
//! dS/dt = -gamma_s S + i conj(Omega(t)) P
//! ```
//!
//! At every stage of the time stepper `E` is rebuilt from `P` by trapezoid
//! integration across `z`; `P` and `S` advance with classic RK4. The control and
//! the boundary signal are interpolated linearly between their grid samples.

use num_complex::Complex64;

use crate::envelope::{Envelope, EnvelopeKind, SpinWave};
use crate::error::{Error, Result};
use crate::grid::{trapz, SpaceGrid};
use crate::medium::MediumParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default cap on the internal step.
pub const DEFAULT_MAX_DT: f64 = 0.02;
/// Default number of spatial points.
pub const DEFAULT_NZ: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub n_z: usize,
    /// Overrides the automatic internal step `min(0.02, 0.1 / (1 + |Omega|_max^2))`.
    pub max_dt: Option<f64>,
    /// Keep the full `(t, z)` history of E, P and S at the stage grid points.
    pub keep_fields: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_z: DEFAULT_NZ,
            max_dt: None,
            keep_fields: false,
        }
    }
}

impl SolverOptions {
    pub fn with_fields(self) -> Self {
        Self {
            keep_fields: true,
            ..self
        }
    }

    pub fn space(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.n_z)
    }

    /// Internal step bound for a control of the given peak magnitude.
    pub fn step_bound(&self, omega_peak: f64) -> f64 {
        self.max_dt
            .unwrap_or_else(|| DEFAULT_MAX_DT.min(0.1 / (1.0 + omega_peak * omega_peak)))
    }
}

/// Space-time history of one stage, stored row-major as `[time][z]`.
#[derive(Debug, Clone)]
pub struct StageFields {
    n_z: usize,
    e: Vec<Complex64>,
    p: Vec<Complex64>,
    s: Vec<Complex64>,
}

impl StageFields {
    pub fn n_times(&self) -> usize {
        self.e.len() / self.n_z
    }

    pub fn e(&self, i: usize) -> &[Complex64] {
        &self.e[i * self.n_z..(i + 1) * self.n_z]
    }

    pub fn p(&self, i: usize) -> &[Complex64] {
        &self.p[i * self.n_z..(i + 1) * self.n_z]
    }

    pub fn s(&self, i: usize) -> &[Complex64] {
        &self.s[i * self.n_z..(i + 1) * self.n_z]
    }
}

/// Result of one protocol stage.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub space: SpaceGrid,
    pub control: Envelope,
    /// Boundary signal `E(z = 0, t)`.
    pub input: Envelope,
    /// Transmitted signal `E(z = 1, t)`.
    pub out_envelope: Envelope,
    pub fields: Option<StageFields>,
    pub initial_spin: SpinWave,
    pub initial_polarization: Vec<Complex64>,
    pub final_spin: SpinWave,
    pub final_polarization: Vec<Complex64>,
    /// Energy that left through `z = 1` (the leak, for a writing stage).
    pub leak_energy: f64,
    /// `2 int int |P|^2 dz dt`.
    pub polarization_loss: f64,
    /// `2 gamma_s int int |S|^2 dz dt`.
    pub spin_loss: f64,
    pub internal_dt: f64,
}

impl StageRecord {
    pub fn input_energy(&self) -> f64 {
        self.input.energy()
    }

    pub fn output_energy(&self) -> f64 {
        self.out_envelope.energy()
    }

    pub fn initial_excitation(&self) -> f64 {
        excitation(
            &self.space,
            self.initial_polarization.as_slice(),
            self.initial_spin.samples(),
        )
    }

    pub fn final_excitation(&self) -> f64 {
        excitation(&self.space, &self.final_polarization, self.final_spin.samples())
    }
}

fn excitation(space: &SpaceGrid, p: &[Complex64], s: &[Complex64]) -> f64 {
    let v: Vec<f64> = p.iter().zip(s).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    trapz(&v, space.dz())
}

fn z_integral_sqr(space: &SpaceGrid, v: &[Complex64]) -> f64 {
    let n: Vec<f64> = v.iter().map(|x| x.norm_sqr()).collect();
    trapz(&n, space.dz())
}

struct Rhs {
    sqrt_d: f64,
    dz: f64,
    decay_p: Complex64,
    gamma_s: f64,
}

impl Rhs {
    fn field(&self, e0: Complex64, p: &[Complex64], e: &mut [Complex64]) {
        let c = I * (self.sqrt_d * self.dz * 0.5);
        e[0] = e0;
        for k in 1..p.len() {
            e[k] = e[k - 1] + c * (p[k - 1] + p[k]);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn eval(
        &self,
        omega: Complex64,
        e0: Complex64,
        p: &[Complex64],
        s: &[Complex64],
        dp: &mut [Complex64],
        ds: &mut [Complex64],
        e: &mut [Complex64],
    ) {
        self.field(e0, p, e);
        let couple_e = I * self.sqrt_d;
        let couple_s = I * omega;
        let couple_p = I * omega.conj();
        for k in 0..p.len() {
            dp[k] = -self.decay_p * p[k] + couple_e * e[k] + couple_s * s[k];
            ds[k] = -self.gamma_s * s[k] + couple_p * p[k];
        }
    }
}

fn lerp(a: Complex64, b: Complex64, f: f64) -> Complex64 {
    a * (1.0 - f) + b * f
}

/// Integrates one stage on the control's time grid.
///
/// `input` is the signal entering at `z = 0` (absent means zero boundary) and
/// must share the control's grid. The spatial grid is that of `initial_spin`.
pub fn propagate_stage(
    medium: &MediumParams,
    control: &Envelope,
    initial_spin: &SpinWave,
    input: Option<&Envelope>,
    opts: &SolverOptions,
) -> Result<StageRecord> {
    let grid = *control.grid();
    let input = match input {
        Some(e) if !e.grid().matches(&grid) => {
            return Err(Error::invalid("signal input and control must share a time grid"));
        }
        Some(e) => e.clone(),
        None => Envelope::zeros(grid, EnvelopeKind::Signal),
    };
    let space = *initial_spin.grid();
    let n = space.n_z();
    let bound = opts.step_bound(control.peak_abs());
    if !(bound > 0.0) {
        return Err(Error::invalid("solver step bound must be positive"));
    }
    let n_sub = ((grid.dt() / bound) - 1e-9).ceil().max(1.0) as usize;
    let h = grid.dt() / n_sub as f64;

    let rhs = Rhs {
        sqrt_d: medium.d().sqrt(),
        dz: space.dz(),
        decay_p: Complex64::new(1.0, medium.delta()),
        gamma_s: medium.gamma_s_dimless(),
    };

    let mut p = vec![ZERO; n];
    let mut s = initial_spin.samples().to_vec();
    let mut e = vec![ZERO; n];
    let (mut k1p, mut k2p, mut k3p, mut k4p) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let (mut k1s, mut k2s, mut k3s, mut k4s) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let (mut tp, mut ts) = (vec![ZERO; n], vec![ZERO; n]);

    let omega = control.samples();
    let e_in = input.samples();
    let mut out = Vec::with_capacity(grid.len());
    let mut fields = opts.keep_fields.then(|| StageFields {
        n_z: n,
        e: Vec::with_capacity(n * grid.len()),
        p: Vec::with_capacity(n * grid.len()),
        s: Vec::with_capacity(n * grid.len()),
    });

    let initial_excitation = excitation(&space, &p, &s);
    let mut input_so_far = 0.0;
    let mut p_loss = 0.0;
    let mut s_loss = 0.0;
    let mut prev_p = 0.0;
    let mut prev_s = z_integral_sqr(&space, &s);

    rhs.field(e_in[0], &p, &mut e);
    out.push(e[n - 1]);
    if let Some(f) = fields.as_mut() {
        f.e.extend_from_slice(&e);
        f.p.extend_from_slice(&p);
        f.s.extend_from_slice(&s);
    }

    for i in 0..grid.n_steps() {
        let (o0, o1) = (omega[i], omega[i + 1]);
        let (b0, b1) = (e_in[i], e_in[i + 1]);
        for m in 0..n_sub {
            let f0 = m as f64 / n_sub as f64;
            let fh = (m as f64 + 0.5) / n_sub as f64;
            let f1 = (m + 1) as f64 / n_sub as f64;
            let (om0, omh, om1) = (lerp(o0, o1, f0), lerp(o0, o1, fh), lerp(o0, o1, f1));
            let (bb0, bbh, bb1) = (lerp(b0, b1, f0), lerp(b0, b1, fh), lerp(b0, b1, f1));

            rhs.eval(om0, bb0, &p, &s, &mut k1p, &mut k1s, &mut e);
            for k in 0..n {
                tp[k] = p[k] + k1p[k] * (0.5 * h);
                ts[k] = s[k] + k1s[k] * (0.5 * h);
            }
            rhs.eval(omh, bbh, &tp, &ts, &mut k2p, &mut k2s, &mut e);
            for k in 0..n {
                tp[k] = p[k] + k2p[k] * (0.5 * h);
                ts[k] = s[k] + k2s[k] * (0.5 * h);
            }
            rhs.eval(omh, bbh, &tp, &ts, &mut k3p, &mut k3s, &mut e);
            for k in 0..n {
                tp[k] = p[k] + k3p[k] * h;
                ts[k] = s[k] + k3s[k] * h;
            }
            rhs.eval(om1, bb1, &tp, &ts, &mut k4p, &mut k4s, &mut e);
            let w = h / 6.0;
            for k in 0..n {
                p[k] += (k1p[k] + (k2p[k] + k3p[k]) * 2.0 + k4p[k]) * w;
                s[k] += (k1s[k] + (k2s[k] + k3s[k]) * 2.0 + k4s[k]) * w;
            }
        }

        let t = grid.time(i + 1);
        rhs.field(e_in[i + 1], &p, &mut e);
        out.push(e[n - 1]);

        let now_p = z_integral_sqr(&space, &p);
        let now_s = z_integral_sqr(&space, &s);
        p_loss += grid.dt() * (prev_p + now_p);
        s_loss += grid.dt() * rhs.gamma_s * (prev_s + now_s);
        prev_p = now_p;
        prev_s = now_s;

        input_so_far += 0.5 * grid.dt() * (e_in[i].norm_sqr() + e_in[i + 1].norm_sqr());
        let exc = now_p + now_s;
        let budget = initial_excitation + input_so_far;
        if !exc.is_finite() || (exc > 10.0 * budget && exc > 1e-300) {
            return Err(Error::NumericalInstability { dt: h, time: t });
        }

        if let Some(f) = fields.as_mut() {
            f.e.extend_from_slice(&e);
            f.p.extend_from_slice(&p);
            f.s.extend_from_slice(&s);
        }
    }

    let out_envelope = Envelope::new(grid, out, EnvelopeKind::Signal)?;
    Ok(StageRecord {
        space,
        control: control.clone(),
        leak_energy: out_envelope.energy(),
        input,
        out_envelope,
        fields,
        initial_spin: initial_spin.clone(),
        initial_polarization: vec![ZERO; n],
        final_spin: SpinWave::new(space, s)?,
        final_polarization: p,
        polarization_loss: p_loss,
        spin_loss: s_loss,
        internal_dt: h,
    })
}

/// Writing stage from an empty medium. Returns the stored spin wave and the leaked energy.
pub fn store(
    medium: &MediumParams,
    input: &Envelope,
    writing_control: &Envelope,
    opts: &SolverOptions,
) -> Result<(SpinWave, f64)> {
    let empty = SpinWave::zeros(opts.space()?);
    let rec = propagate_stage(medium, writing_control, &empty, Some(input), opts)?;
    Ok((rec.final_spin, rec.leak_energy))
}

/// Control-off storage: `S(z) exp(-gamma_s tau)`, evaluated analytically.
pub fn dark_storage(spin: &SpinWave, tau: f64, gamma_s_dimless: f64) -> Result<SpinWave> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("storage time must be >= 0, got {tau}")));
    }
    if !(gamma_s_dimless >= 0.0) {
        return Err(Error::invalid("spin decay rate must be >= 0"));
    }
    if tau == 0.0 || gamma_s_dimless == 0.0 {
        return Ok(spin.clone());
    }
    Ok(spin.scaled(Complex64::new((-gamma_s_dimless * tau).exp(), 0.0)))
}

/// Forward retrieval of `spin` with no signal input; returns `E(z = 1, t)`.
pub fn retrieve(
    medium: &MediumParams,
    spin: &SpinWave,
    retrieval_control: &Envelope,
    opts: &SolverOptions,
) -> Result<Envelope> {
    Ok(propagate_stage(medium, retrieval_control, spin, None, opts)?.out_envelope)
}

/// Relative violation of the stage energy budget
///
/// `E_in = E_out + 2 int int |P|^2 + 2 gamma_s int int |S|^2 + [int (|S|^2 + |P|^2) dz]_initial^final`,
/// normalized by the larger of the input energy and the initial excitation.
/// The same statement holds for writing (input, empty start), retrieval (no
/// input, stored start) and any mixture.
pub fn energy_balance(record: &StageRecord) -> f64 {
    let ein = record.input_energy();
    let init = record.initial_excitation();
    let scale = ein.max(init);
    if scale == 0.0 {
        return 0.0;
    }
    let gap =
        ein - record.output_energy() - record.polarization_loss - record.spin_loss - (record.final_excitation() - init);
    gap.abs() / scale
}
