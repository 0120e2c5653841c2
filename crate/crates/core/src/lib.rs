//! Simulation and optimal control of light storage in Lambda-type atomic ensembles.
//!
//! The crate integrates the signal / polarization / spin-wave equations through
//! writing, dark storage and retrieval ([`solver`]), finds the optimal spin wave
//! for a given optical depth ([`optimal`]), and synthesizes control envelopes that
//! store any input pulse and retrieve it into any target shape ([`shaping`]).
//! Everything is dimensionless: time in `1/gamma`, position in units of the
//! medium length, Rabi frequencies in units of `gamma`.

pub mod envelope;
pub mod error;
pub mod grid;
pub mod io;
pub mod medium;
pub mod metrics;
pub mod optimal;
pub mod pulses;
pub mod scenario;
pub mod shaping;
pub mod solver;

pub use envelope::{Envelope, EnvelopeKind, SpinWave};
pub use error::{Error, Result};
pub use grid::{SpaceGrid, TimeGrid};
pub use medium::MediumParams;
pub use metrics::MetricsReport;
