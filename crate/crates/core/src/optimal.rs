//! Optimal spin wave and maximum storage-plus-retrieval efficiency for a given optical depth.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::envelope::{Envelope, EnvelopeKind, SpinWave};
use crate::error::{Error, Result};
use crate::grid::{SpaceGrid, TimeGrid};
use crate::medium::MediumParams;
use crate::pulses::make_gaussian;
use crate::shaping::{time_reverse, AdiabaticPropagator, Scratch};
use crate::solver::{retrieve, store, SolverOptions};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct OptimalModeResult {
    /// Unit norm, real positive mean.
    pub mode: SpinWave,
    pub eta_max: f64,
    pub iterations: usize,
    pub convergence_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimalModeConfig {
    /// Write window `[-t_window, 0]` and read window `[0, t_window]`.
    pub t_window: f64,
    pub dt: f64,
    pub solver: SolverOptions,
    pub tol: f64,
    pub max_iter: usize,
    /// Initial input; resampled onto the write window. Defaults to a centered Gaussian.
    pub seed: Option<Envelope>,
}

impl Default for OptimalModeConfig {
    fn default() -> Self {
        Self {
            t_window: 50.0,
            dt: 0.02,
            solver: SolverOptions::default(),
            tol: 1e-4,
            max_iter: 50,
            seed: None,
        }
    }
}

impl OptimalModeConfig {
    pub fn write_grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_spacing(-self.t_window, 0.0, self.dt)
    }

    pub fn read_grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_spacing(0.0, self.t_window, self.dt)
    }
}

/// Time-reversal iteration: store, retrieve forward with the mirrored constant
/// control, feed back the conjugated, time-reversed and renormalized output.
///
/// Spin decay is switched off; the fixed point is the stored spin wave.
pub fn optimal_mode(medium: &MediumParams, cfg: &OptimalModeConfig) -> Result<OptimalModeResult> {
    let d = medium.d();
    if !(d > 0.0) {
        return Err(Error::invalid("optimal mode needs a positive optical depth"));
    }
    if !(cfg.t_window > 0.0) || !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::invalid("window, tolerance and iteration limit must be positive"));
    }
    let medium = medium.without_spin_decay();
    let write = cfg.write_grid()?;
    let read = cfg.read_grid()?;
    // constant control whose group delay d / Omega^2 is half the window
    let omega = Complex64::new((2.0 * d / cfg.t_window).sqrt(), 0.0);
    let w_ctrl = Envelope::constant(write, omega, EnvelopeKind::Control);
    let r_ctrl = Envelope::constant(read, omega, EnvelopeKind::Control);

    let mut input = match &cfg.seed {
        Some(s) => s.resampled(&write).with_kind(EnvelopeKind::Signal).normalized()?,
        None => make_gaussian(-0.5 * cfg.t_window, 6.0f64.min(cfg.t_window / 8.0), &write)?,
    };
    let mut history = Vec::new();
    for k in 0..cfg.max_iter {
        let (spin, _) = store(&medium, &input, &w_ctrl, &cfg.solver)?;
        let out = retrieve(&medium, &spin, &r_ctrl, &cfg.solver)?;
        let eff = out.energy();
        history.push(eff);
        if k > 0 && (eff - history[k - 1]).abs() < cfg.tol {
            return Ok(OptimalModeResult {
                mode: spin.canonical()?,
                eta_max: eff,
                iterations: k + 1,
                convergence_history: history,
            });
        }
        if !(eff > 0.0) {
            break;
        }
        input = time_reverse(&out, 0.0).conj().normalized()?;
    }
    Err(Error::NonConvergence { history })
}

/// Optimal efficiency for each `alpha_l`, run in parallel.
pub fn efficiency_sweep(
    base: &MediumParams,
    alpha_ls: &[f64],
    cfg: &OptimalModeConfig,
) -> Result<Vec<(f64, OptimalModeResult)>> {
    alpha_ls
        .par_iter()
        .map(|&a| Ok((a, optimal_mode(&base.with_alpha_l(a)?, cfg)?)))
        .collect()
}

/// Brute-force leading singular mode of adiabatic storage followed by forward retrieval.
///
/// Inputs are expanded in hat functions of the clock `u`, spin waves in hat
/// functions of `z`. Time invariance means one impulse propagation gives every
/// column of the storage map; each spatial basis element is retrieved
/// separately (in parallel).
pub fn kernel_oracle(medium: &MediumParams, n_z: usize) -> Result<OptimalModeResult> {
    if !(2..=100).contains(&n_z) {
        return Err(Error::invalid(format!(
            "kernel oracle needs 2 <= n_z <= 100, got {n_z}"
        )));
    }
    let d = medium.d();
    let space = SpaceGrid::new(n_z)?;
    if d == 0.0 {
        let flat = SpinWave::from_fn(space, |_| Complex64::new(1.0, 0.0)).canonical()?;
        return Ok(OptimalModeResult {
            mode: flat,
            eta_max: 0.0,
            iterations: 0,
            convergence_history: vec![0.0],
        });
    }
    let prop = AdiabaticPropagator::new(d, space);
    let u_span = (3.0 * d + 20.0).max(40.0);
    let du_b = 0.1;
    let sub = 10;
    let du = du_b / sub as f64;
    let n_u = (u_span / du_b).round() as usize;

    // storage: response to a unit hat centered at u = 0, sampled at lags (j + 1) du_b
    let storage_cols: Vec<Vec<Complex64>> = {
        let hat = |u: f64| Complex64::new((1.0 - (u / du_b).abs()).max(0.0), 0.0);
        let mut s = vec![ZERO; n_z];
        let mut scratch = Scratch::default();
        let mut cols = Vec::with_capacity(n_u + 1);
        let mut u = -du_b;
        for _ in 0..2 * sub {
            prop.step(&mut s, [hat(u), hat(u + 0.5 * du), hat(u + du)], du, &mut scratch);
            u += du;
        }
        cols.push(s.clone());
        for _ in 0..n_u {
            for _ in 0..sub {
                prop.step(&mut s, [ZERO; 3], du, &mut scratch);
            }
            cols.push(s.clone());
        }
        cols
    };
    // the input hat centered at j du_b is read out at (n_u + 1) du_b
    let a = DMatrix::from_fn(n_z, n_u + 1, |k, j| storage_cols[n_u - j][k].re);

    let retrieval_cols: Vec<Vec<f64>> = (0..n_z)
        .into_par_iter()
        .map(|k| {
            let mut s = vec![ZERO; n_z];
            s[k] = Complex64::new(1.0, 0.0);
            let mut scratch = Scratch::default();
            let mut out = Vec::with_capacity(n_u + 1);
            out.push(prop.output(&s, ZERO, &mut scratch).re);
            for _ in 0..n_u {
                for _ in 0..sub {
                    prop.step(&mut s, [ZERO; 3], du, &mut scratch);
                }
                out.push(prop.output(&s, ZERO, &mut scratch).re);
            }
            out
        })
        .collect();
    let f = DMatrix::from_fn(n_u + 1, n_z, |i, k| retrieval_cols[k][i]);

    // trapezoid weights turn the map into one between Euclidean spaces
    let w: Vec<f64> = (0..=n_u)
        .map(|i| if i == 0 || i == n_u { 0.5 * du_b } else { du_b })
        .collect();
    let mut m = &f * &a;
    for i in 0..=n_u {
        for j in 0..=n_u {
            m[(i, j)] *= (w[i] / w[j]).sqrt();
        }
    }
    let svd = m.svd(false, true);
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |best, x| if x.1 > best.1 { x } else { best });
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::invalid("singular value decomposition failed"))?;
    let coeffs: Vec<f64> = (0..=n_u).map(|j| v_t[(idx, j)] / w[j].sqrt()).collect();
    let stored: Vec<Complex64> = (0..n_z)
        .map(|k| Complex64::new((0..=n_u).map(|j| a[(k, j)] * coeffs[j]).sum(), 0.0))
        .collect();
    Ok(OptimalModeResult {
        mode: SpinWave::new(space, stored)?.canonical()?,
        eta_max: sigma * sigma,
        iterations: 1,
        convergence_history: vec![sigma * sigma],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medium(alpha_l: f64) -> MediumParams {
        MediumParams::resonant(alpha_l, 0.0).unwrap()
    }

    #[test]
    fn oracle_without_coupling_is_zero() {
        let r = kernel_oracle(&medium(0.0), 40).unwrap();
        assert_eq!(r.eta_max, 0.0);
    }

    #[test]
    fn oracle_is_passive_and_grows_with_depth() {
        let e6 = kernel_oracle(&medium(12.0), 60).unwrap().eta_max;
        let e12 = kernel_oracle(&medium(24.0), 60).unwrap().eta_max;
        let e24 = kernel_oracle(&medium(48.0), 60).unwrap().eta_max;
        assert!(0.0 < e6 && e6 < e12 && e12 < e24 && e24 < 1.0, "{e6} {e12} {e24}");
    }

    #[test]
    fn oracle_grid_limits() {
        assert!(kernel_oracle(&medium(24.0), 101).is_err());
        assert!(kernel_oracle(&medium(24.0), 1).is_err());
    }

    #[test]
    fn iteration_needs_depth() {
        assert!(optimal_mode(&medium(0.0), &OptimalModeConfig::default()).is_err());
    }

    #[test]
    fn iteration_limit_reports_history() {
        let cfg = OptimalModeConfig {
            max_iter: 1,
            solver: SolverOptions {
                n_z: 50,
                ..Default::default()
            },
            ..Default::default()
        };
        match optimal_mode(&medium(24.0), &cfg) {
            Err(Error::NonConvergence { history }) => assert_eq!(history.len(), 1),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
