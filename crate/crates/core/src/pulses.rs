//! Signal pulse shapes: Gaussian, linear ramps and two-bin (time-bin) superpositions.
//!
//! Every constructor returns a unit-energy [`Envelope`] (trapezoid quadrature on its grid).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampSign {
    Positive,
    Negative,
}

pub fn make_gaussian(center: f64, sigma: f64, grid: &TimeGrid) -> Result<Envelope> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    if !grid.contains(center) {
        return Err(Error::invalid(format!(
            "gaussian center {center} outside grid [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    gaussian_unchecked(center, sigma, grid)
}

fn gaussian_unchecked(center: f64, sigma: f64, grid: &TimeGrid) -> Result<Envelope> {
    Envelope::from_fn(*grid, EnvelopeKind::Signal, |t| {
        let x = (t - center) / sigma;
        Complex64::new((-0.5 * x * x).exp(), 0.0)
    })?
    .normalized()
}

/// Ramp of the given `duration` centered in the grid, with the sharp edge smoothed over `duration / 20`.
pub fn make_ramp(sign: RampSign, duration: f64, grid: &TimeGrid) -> Result<Envelope> {
    let start = grid.t_start() + 0.5 * (grid.span() - duration);
    make_ramp_at(sign, duration, start, duration / 20.0, grid)
}

/// Ramp supported on `[start, start + duration]`.
///
/// A positive ramp rises linearly from zero and drops back to zero over the last
/// `rise` time units; a negative ramp is its mirror image. `rise = 0` gives the
/// ideal discontinuous ramp.
pub fn make_ramp_at(sign: RampSign, duration: f64, start: f64, rise: f64, grid: &TimeGrid) -> Result<Envelope> {
    if !(duration > 0.0) {
        return Err(Error::invalid(format!("ramp duration must be > 0, got {duration}")));
    }
    if !(rise >= 0.0 && rise < duration) {
        return Err(Error::invalid(format!(
            "ramp rise time {rise} must lie in [0, duration)"
        )));
    }
    let end = start + duration;
    if !grid.contains(start) || !grid.contains(end) {
        return Err(Error::invalid(format!(
            "ramp support [{start}, {end}] exceeds grid [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let profile = |t: f64| -> f64 {
        // x runs 0 -> 1 across the support in the rising direction
        let x = match sign {
            RampSign::Positive => (t - start) / duration,
            RampSign::Negative => (end - t) / duration,
        };
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let edge = if rise > 0.0 {
            ((1.0 - x) * duration / rise).min(1.0)
        } else {
            1.0
        };
        x * edge
    };
    Envelope::from_fn(*grid, EnvelopeKind::Signal, |t| Complex64::new(profile(t), 0.0))?.normalized()
}

/// A time-bin pulse together with its two unit-energy Gaussian bins.
#[derive(Debug, Clone)]
pub struct TimeBinPulse {
    pub envelope: Envelope,
    pub early: Envelope,
    pub late: Envelope,
    /// Centers of the early and late bins.
    pub centers: (f64, f64),
    /// Weights `(cos theta, e^{i phi} sin theta)` after the overall normalization.
    pub weights: (Complex64, Complex64),
}

/// `cos(theta) g1(t) + e^{i phi} sin(theta) g2(t)` normalized to unit energy, bins centered in the grid.
pub fn make_time_bin(theta: f64, phi: f64, sigma_bin: f64, separation: f64, grid: &TimeGrid) -> Result<Envelope> {
    Ok(make_time_bin_parts(theta, phi, sigma_bin, separation, grid)?.envelope)
}

pub fn make_time_bin_parts(
    theta: f64,
    phi: f64,
    sigma_bin: f64,
    separation: f64,
    grid: &TimeGrid,
) -> Result<TimeBinPulse> {
    if !(sigma_bin > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {sigma_bin}")));
    }
    if !(separation >= 4.0 * sigma_bin) {
        return Err(Error::invalid(format!(
            "time bins overlap: separation {separation} < 4 sigma_bin = {}",
            4.0 * sigma_bin
        )));
    }
    let mid = 0.5 * (grid.t_start() + grid.t_end());
    let (c1, c2) = (mid - 0.5 * separation, mid + 0.5 * separation);
    if !grid.contains(c1 - 3.0 * sigma_bin) || !grid.contains(c2 + 3.0 * sigma_bin) {
        return Err(Error::invalid("time bins do not fit inside the grid"));
    }
    let g1 = gaussian_unchecked(c1, sigma_bin, grid)?;
    let g2 = gaussian_unchecked(c2, sigma_bin, grid)?;
    let w1 = Complex64::new(theta.cos(), 0.0);
    let w2 = Complex64::from_polar(theta.sin(), phi);
    let samples = g1
        .samples()
        .iter()
        .zip(g2.samples())
        .map(|(a, b)| a * w1 + b * w2)
        .collect();
    let raw = Envelope::new(*grid, samples, EnvelopeKind::Signal)?;
    let scale = 1.0 / raw.energy().sqrt();
    Ok(TimeBinPulse {
        envelope: raw.scaled(Complex64::new(scale, 0.0)),
        early: g1,
        late: g2,
        centers: (c1, c2),
        weights: (w1 * scale, w2 * scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::overlap;
    use std::f64::consts::PI;

    fn write_grid() -> TimeGrid {
        TimeGrid::new(-50.0, 0.0, 5000).unwrap()
    }

    #[test]
    fn gaussian_peak_and_energy() {
        let g = make_gaussian(-25.0, 6.0, &write_grid()).unwrap();
        assert!((g.energy() - 1.0).abs() < 1e-9);
        let (imax, _) = g
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((g.grid().time(imax) + 25.0).abs() < 1e-9);
        assert!((overlap(&g, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rejects_bad_sigma_and_center() {
        assert!(make_gaussian(-25.0, 0.0, &write_grid()).is_err());
        assert!(make_gaussian(-25.0, -1.0, &write_grid()).is_err());
        assert!(make_gaussian(10.0, 6.0, &write_grid()).is_err());
    }

    #[test]
    fn displaced_gaussians_overlap_closed_form() {
        // amplitudes exp(-x^2 / 2 sigma^2) displaced by dt give J^2 = exp(-dt^2 / (2 sigma^2))
        let grid = TimeGrid::new(-80.0, 30.0, 11000).unwrap();
        let a = make_gaussian(-25.0, 6.0, &grid).unwrap();
        let b = make_gaussian(-10.0, 6.0, &grid).unwrap();
        let expected = (-225.0f64 / 72.0).exp();
        assert!((overlap(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn ramp_shape_and_reverse_overlap() {
        let grid = write_grid();
        let r = make_ramp_at(RampSign::Positive, 50.0, -50.0, 0.0, &grid).unwrap();
        // proportional to (t + T)/T
        let k = r.samples()[2500].re / 0.5;
        for (i, t) in grid.times().enumerate().step_by(97) {
            assert!((r.samples()[i].re - k * (t + 50.0) / 50.0).abs() < 1e-12);
        }
        let n = make_ramp_at(RampSign::Negative, 50.0, -50.0, 0.0, &grid).unwrap();
        // (int x(1-x))^2 / (int x^2)^2 = (1/6)^2 / (1/3)^2
        assert!((overlap(&r, &n).unwrap() - 0.25).abs() < 1e-6);
        assert!((overlap(&r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_ramp_is_centered_and_smoothed() {
        let grid = write_grid();
        let r = make_ramp(RampSign::Positive, 40.0, &grid).unwrap();
        assert!((r.energy() - 1.0).abs() < 1e-9);
        assert_eq!(r.value_at(-45.5).re, 0.0);
        assert!(r.value_at(-5.0).re.abs() < 1e-12);
        assert!(r.value_at(-6.0).re > 0.0 && r.value_at(-6.0).re < r.value_at(-7.0).re);
        let n = make_ramp(RampSign::Negative, 40.0, &grid).unwrap();
        assert!(n.value_at(-44.0).re > n.value_at(-10.0).re);
        assert!(make_ramp(RampSign::Positive, 60.0, &grid).is_err());
    }

    #[test]
    fn time_bin_weights() {
        let grid = TimeGrid::new(0.0, 50.0, 5000).unwrap();
        let p = make_time_bin_parts(0.0, 0.0, 3.5, 21.0, &grid).unwrap();
        assert!((overlap(&p.envelope, &p.early).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(p.weights.1.norm(), 0.0);

        let p = make_time_bin_parts(PI / 3.0, 0.3, 3.5, 21.0, &grid).unwrap();
        let e1 = p.early.scaled(p.weights.0).energy();
        let e2 = p.late.scaled(p.weights.1).energy();
        assert!((e2 / e1 - 3.0).abs() < 1e-6);
        assert!((p.envelope.energy() - 1.0).abs() < 1e-9);

        let p = make_time_bin_parts(PI / 4.0, 0.0, 3.5, 21.0, &grid).unwrap();
        let e1 = p.early.scaled(p.weights.0).energy();
        let e2 = p.late.scaled(p.weights.1).energy();
        assert!((e1 - e2).abs() < 1e-9);
    }

    #[test]
    fn time_bin_rejects_overlapping_bins() {
        let grid = TimeGrid::new(0.0, 50.0, 5000).unwrap();
        assert!(make_time_bin(0.5, 0.0, 3.5, 10.0, &grid).is_err());
        assert!(make_time_bin(0.5, 0.0, 6.0, 40.0, &grid).is_err());
    }
}
