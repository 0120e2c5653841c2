//! Uniform time and space grids plus the trapezoid quadratures used everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid over `[t_start, t_end]` with `n_steps` intervals (so `n_steps + 1` points).
///
/// Times are dimensionless, in units of `1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::invalid(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
        })
    }

    /// Grid over `[t_start, t_end]` whose spacing is as close as possible to `dt` without exceeding it.
    pub fn with_spacing(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {dt}")));
        }
        let n = ((t_end - t_start) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t_start, t_end, n)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.span() / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    pub fn contains(&self, t: f64) -> bool {
        let eps = 1e-9 * self.dt();
        t >= self.t_start - eps && t <= self.t_end + eps
    }

    /// Same spacing and length, shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            t_start: self.t_start + offset,
            t_end: self.t_end + offset,
            n_steps: self.n_steps,
        }
    }

    /// Grids that share point count and coincide within a small fraction of a step.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let tol = 1e-6 * self.dt();
        self.n_steps == other.n_steps
            && (self.t_start - other.t_start).abs() <= tol
            && (self.t_end - other.t_end).abs() <= tol
    }

    /// Locate `t` as (lower index, fractional position in that interval), clamped to the grid.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let x = ((t - self.t_start) / self.dt()).clamp(0.0, self.n_steps as f64);
        let i = (x.floor() as usize).min(self.n_steps.saturating_sub(1));
        (i, x - i as f64)
    }
}

/// Uniform grid of `n_z` points on `z in [0, 1]` (units of the medium length L).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceGrid {
    n_z: usize,
}

impl SpaceGrid {
    pub fn new(n_z: usize) -> Result<Self> {
        if n_z < 2 {
            return Err(Error::invalid(format!("space grid needs n_z >= 2, got {n_z}")));
        }
        Ok(Self { n_z })
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn dz(&self) -> f64 {
        1.0 / (self.n_z - 1) as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        if k + 1 == self.n_z {
            1.0
        } else {
            k as f64 * self.dz()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_z).map(move |k| self.z(k))
    }
}

/// Trapezoid rule for uniformly spaced samples.
pub fn trapz(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Running trapezoid integral; the first entry is zero.
pub fn cumtrapz(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dx * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}
