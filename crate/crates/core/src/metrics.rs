//! Memory figures of merit: efficiency, overlap integral, fidelity, HOM coincidence and time-bin analysis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, EnvelopeKind};
use crate::error::{Error, Result};
use crate::grid::{trapz, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eta: f64,
    pub j2: f64,
    pub fidelity: f64,
    pub hom_coincidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinSummary>,
}

impl MetricsReport {
    pub fn new(eta: f64, j2: f64) -> Self {
        let (fidelity, hom_coincidence) = hom_and_fidelity(eta, j2);
        Self {
            eta,
            j2,
            fidelity,
            hom_coincidence,
            bins: None,
        }
    }

    /// Computes efficiency and overlap of `output` against `input` and `target`.
    pub fn evaluate(input: &Envelope, output: &Envelope, target: &Envelope) -> Result<Self> {
        Ok(Self::new(efficiency(input, output)?, overlap(output, target)?))
    }
}

/// Serializable part of [`BinMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub energies: [f64; 2],
    pub ratio: f64,
    pub j2_bins: f64,
    pub relative_phase: f64,
}

/// Energy ratio between retrieved and input pulses.
pub fn efficiency(e_in: &Envelope, e_out: &Envelope) -> Result<f64> {
    let ein = e_in.energy();
    if !(ein > 0.0) {
        return Err(Error::invalid("efficiency needs an input with nonzero energy"));
    }
    Ok(e_out.energy() / ein)
}

/// `|int conj(a) b dt|^2 / (int |a|^2 dt int |b|^2 dt)`; `b` is resampled onto `a`'s grid if needed.
pub fn overlap(e_a: &Envelope, e_b: &Envelope) -> Result<f64> {
    let b = e_b.resampled(e_a.grid());
    let (ia, ib) = (e_a.energy(), b.energy());
    if !(ia > 0.0 && ib > 0.0) {
        return Err(Error::invalid("overlap needs two envelopes with nonzero energy"));
    }
    let cross = inner(e_a, &b);
    Ok((cross.norm_sqr() / (ia * ib)).min(1.0))
}

/// Trapezoid `int conj(a) b dt` for envelopes on the same grid.
pub(crate) fn inner(a: &Envelope, b: &Envelope) -> Complex64 {
    let n = a.samples().len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        acc += x.conj() * y * w;
    }
    acc * a.grid().dt()
}

/// Returns `(F, coincidence)` with `F = eta J^2` and HOM coincidence `(1 - J^2) / 2`.
pub fn hom_and_fidelity(eta: f64, j2: f64) -> (f64, f64) {
    (eta * j2, 0.5 * (1.0 - j2))
}

#[derive(Debug, Clone)]
pub struct BinMetrics {
    pub energies: [f64; 2],
    /// Late-bin energy over early-bin energy.
    pub ratio: f64,
    /// Overlap of the two bins after moving the late bin onto the early bin's centroid.
    pub j2_bins: f64,
    /// `arg <g1, g2>` after re-centering.
    pub relative_phase: f64,
    pub bins: [Envelope; 2],
}

impl BinMetrics {
    pub fn summary(&self) -> BinSummary {
        BinSummary {
            energies: self.energies,
            ratio: self.ratio,
            j2_bins: self.j2_bins,
            relative_phase: self.relative_phase,
        }
    }
}

/// Splits `e_out` into two time windows and compares the pieces.
pub fn bin_analysis(e_out: &Envelope, windows: [(f64, f64); 2]) -> Result<BinMetrics> {
    let grid = e_out.grid();
    for &(a, b) in &windows {
        if !(b > a) || !grid.contains(a) || !grid.contains(b) {
            return Err(Error::invalid(format!(
                "bin window [{a}, {b}] is empty or outside [{}, {}]",
                grid.t_start(),
                grid.t_end()
            )));
        }
    }
    let [(a0, b0), (a1, b1)] = windows;
    if a1 < b0 && a0 < b1 {
        return Err(Error::invalid("bin windows overlap"));
    }
    let g1 = window(e_out, a0, b0)?;
    let g2 = window(e_out, a1, b1)?;
    let energies = [g1.energy(), g2.energy()];
    let ratio = if energies[0] > 0.0 {
        energies[1] / energies[0]
    } else if energies[1] > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    let (j2_bins, relative_phase) = if energies[0] > 0.0 && energies[1] > 0.0 {
        let shift = centroid(&g2) - centroid(&g1);
        let moved = Envelope::from_fn(*g1.grid(), EnvelopeKind::Signal, |t| g2.value_at(t + shift))?;
        let em = moved.energy();
        if em > 0.0 {
            let cross = inner(&g1, &moved);
            ((cross.norm_sqr() / (energies[0] * em)).min(1.0), cross.arg())
        } else {
            (0.0, 0.0)
        }
    } else {
        (0.0, 0.0)
    };
    Ok(BinMetrics {
        energies,
        ratio,
        j2_bins,
        relative_phase,
        bins: [g1, g2],
    })
}

fn window(e: &Envelope, a: f64, b: f64) -> Result<Envelope> {
    let grid = e.grid();
    let dt = grid.dt();
    let i0 = ((a - grid.t_start()) / dt - 1e-9).ceil().max(0.0) as usize;
    let i1 = (((b - grid.t_start()) / dt + 1e-9).floor() as usize).min(grid.n_steps());
    if i1 <= i0 {
        return Err(Error::invalid(format!(
            "bin window [{a}, {b}] holds fewer than two samples"
        )));
    }
    let sub = TimeGrid::new(grid.time(i0), grid.time(i1), i1 - i0)?;
    Envelope::new(sub, e.samples()[i0..=i1].to_vec(), e.kind())
}

fn centroid(e: &Envelope) -> f64 {
    let w = e.intensities();
    let tw: Vec<f64> = e.grid().times().zip(&w).map(|(t, x)| t * x).collect();
    trapz(&tw, e.grid().dt()) / trapz(&w, e.grid().dt())
}
