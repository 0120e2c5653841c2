//! Sampled envelopes in time (signal and control fields) and in space (spin waves).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapz, SpaceGrid, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Signal,
    Control,
}

/// Complex amplitude sampled on a uniform [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    grid: TimeGrid,
    samples: Vec<Complex64>,
    kind: EnvelopeKind,
}

impl Envelope {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>, kind: EnvelopeKind) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "envelope has {} samples but its grid has {} points",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("envelope samples must be finite"));
        }
        Ok(Self { grid, samples, kind })
    }

    pub fn zeros(grid: TimeGrid, kind: EnvelopeKind) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
            kind,
        }
    }

    pub fn constant(grid: TimeGrid, value: Complex64, kind: EnvelopeKind) -> Self {
        Self {
            grid,
            samples: vec![value; grid.len()],
            kind,
        }
    }

    pub fn from_fn(grid: TimeGrid, kind: EnvelopeKind, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = grid.times().map(f).collect();
        Self::new(grid, samples, kind)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }

    /// Trapezoid energy `integral |E|^2 dt`.
    pub fn energy(&self) -> f64 {
        trapz(&self.intensities(), self.grid.dt())
    }

    /// Largest sample magnitude.
    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn within_cap(&self, cap: f64) -> bool {
        self.peak_abs() <= cap * (1.0 + 1e-12)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, t: f64) -> Complex64 {
        if !self.grid.contains(t) {
            return Complex64::new(0.0, 0.0);
        }
        let (i, f) = self.grid.locate(t);
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|s| s * c).collect(),
            kind: self.kind,
        }
    }

    /// Rescaled to unit energy. Errors if the energy is zero.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if !(e > 0.0) {
            return Err(Error::invalid("cannot normalize a zero-energy envelope"));
        }
        Ok(self.scaled(Complex64::new(1.0 / e.sqrt(), 0.0)))
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            grid: self.grid.shifted(offset),
            samples: self.samples.clone(),
            kind: self.kind,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|s| s.conj()).collect(),
            kind: self.kind,
        }
    }

    pub fn with_kind(mut self, kind: EnvelopeKind) -> Self {
        self.kind = kind;
        self
    }

    /// Samples this envelope onto another grid by linear interpolation.
    pub fn resampled(&self, grid: &TimeGrid) -> Self {
        if self.grid.matches(grid) {
            return Self {
                grid: *grid,
                ..self.clone()
            };
        }
        Self {
            grid: *grid,
            samples: grid.times().map(|t| self.value_at(t)).collect(),
            kind: self.kind,
        }
    }
}

/// Ground-state coherence profile `S(z)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWave {
    grid: SpaceGrid,
    samples: Vec<Complex64>,
}

impl SpinWave {
    pub fn new(grid: SpaceGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_z() {
            return Err(Error::invalid(format!(
                "spin wave has {} samples but n_z = {}",
                samples.len(),
                grid.n_z()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("spin-wave samples must be finite"));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: SpaceGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n_z()],
        }
    }

    pub fn from_fn(grid: SpaceGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            samples: grid.points().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `integral_0^1 |S|^2 dz` by the trapezoid rule.
    pub fn norm_sqr(&self) -> f64 {
        let v: Vec<f64> = self.samples.iter().map(|s| s.norm_sqr()).collect();
        trapz(&v, self.grid.dz())
    }

    /// `integral_0^1 conj(self) * other dz`.
    pub fn inner(&self, other: &SpinWave) -> Result<Complex64> {
        let other = other.resampled(&self.grid);
        let dz = self.grid.dz();
        let n = self.samples.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            acc += self.samples[k].conj() * other.samples[k] * w;
        }
        Ok(acc * dz)
    }

    /// Normalized squared overlap `|<a,b>|^2 / (|a|^2 |b|^2)`.
    pub fn overlap(&self, other: &SpinWave) -> Result<f64> {
        let na = self.norm_sqr();
        let nb = other.norm_sqr();
        if !(na > 0.0 && nb > 0.0) {
            return Err(Error::invalid("overlap of a zero spin wave"));
        }
        Ok(self.inner(other)?.norm_sqr() / (na * nb))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(Error::invalid("cannot normalize a zero spin wave"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Unit norm with the global phase chosen so that `integral S dz` is real and positive.
    pub fn canonical(&self) -> Result<Self> {
        let s = self.normalized()?;
        let dz = s.grid.dz();
        let n = s.samples.len();
        let total: Complex64 = s
            .samples
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k + 1 == n { v * 0.5 } else { *v })
            .sum::<Complex64>()
            * dz;
        if total.norm() == 0.0 {
            return Ok(s);
        }
        Ok(s.scaled(total.conj() / total.norm()))
    }

    /// Mirror image `S(1 - z)`.
    pub fn flipped(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            grid: self.grid,
            samples,
        }
    }

    pub fn value_at(&self, z: f64) -> Complex64 {
        let n = self.samples.len();
        let x = (z.clamp(0.0, 1.0) / self.grid.dz()).min((n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let f = x - k as f64;
        self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
    }

    /// Linear interpolation onto another space grid.
    pub fn resampled(&self, grid: &SpaceGrid) -> Self {
        if *grid == self.grid {
            return self.clone();
        }
        Self::from_fn(*grid, |z| self.value_at(z))
    }
}
