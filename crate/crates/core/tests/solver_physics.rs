//! Closed-form checks of the Maxwell-Bloch integrator.

use eit_memory::pulses::make_gaussian;
use eit_memory::solver::{dark_storage, energy_balance, propagate_stage, retrieve, SolverOptions};
use eit_memory::{Envelope, EnvelopeKind, MediumParams, SpaceGrid, SpinWave, TimeGrid};
use num_complex::Complex64;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn centroid(e: &Envelope) -> f64 {
    let w = e.intensities();
    let total: f64 = w.iter().sum();
    e.grid().times().zip(&w).map(|(t, x)| t * x).sum::<f64>() / total
}

#[test]
fn beer_lambert_transmission() {
    // steady state of dE/dz = i sqrt(d) P, P = i sqrt(d) E gives |E(1)|^2 = exp(-2d)
    for alpha_l in [4.0, 24.0] {
        let m = MediumParams::resonant(alpha_l, 0.0).unwrap();
        let g = TimeGrid::with_spacing(0.0, 30.0, 0.02).unwrap();
        let cw = Envelope::constant(g, one(), EnvelopeKind::Signal);
        let off = Envelope::zeros(g, EnvelopeKind::Control);
        let empty = SpinWave::zeros(SpaceGrid::new(200).unwrap());
        let rec = propagate_stage(&m, &off, &empty, Some(&cw), &SolverOptions::default()).unwrap();
        let ln_t = rec.out_envelope.samples().last().unwrap().norm_sqr().ln();
        let expect = -alpha_l;
        assert!(
            ((ln_t - expect) / expect).abs() < 0.01,
            "alpha_l {alpha_l}: ln T = {ln_t}"
        );
    }
}

#[test]
fn dark_spin_decays_without_control() {
    let gs = 0.05;
    let m = MediumParams::resonant(24.0, gs).unwrap();
    let g = TimeGrid::with_spacing(0.0, 10.0, 0.02).unwrap();
    let off = Envelope::zeros(g, EnvelopeKind::Control);
    let s0 = SpinWave::from_fn(SpaceGrid::new(100).unwrap(), |z| Complex64::new(z.sin(), 0.3 * z));
    let rec = propagate_stage(&m, &off, &s0, None, &SolverOptions::default()).unwrap();
    assert!(rec.out_envelope.peak_abs() == 0.0);
    let f = (-gs * 10.0f64).exp();
    for (a, b) in rec.final_spin.samples().iter().zip(s0.samples()) {
        assert!((a - b * f).norm() < 1e-10);
    }
}

#[test]
fn group_delay_follows_d_over_omega_squared() {
    let m = MediumParams::resonant(24.0, 0.0).unwrap();
    let g = TimeGrid::with_spacing(0.0, 80.0, 0.02).unwrap();
    let input = make_gaussian(20.0, 6.0, &g).unwrap();
    for omega in [1.0, 2.0] {
        let c = Envelope::constant(g, Complex64::new(omega, 0.0), EnvelopeKind::Control);
        let empty = SpinWave::zeros(SpaceGrid::new(200).unwrap());
        let rec = propagate_stage(&m, &c, &empty, Some(&input), &SolverOptions::default()).unwrap();
        let delay = centroid(&rec.out_envelope) - centroid(&input);
        let expect = m.d() / (omega * omega);
        assert!(
            (delay / expect - 1.0).abs() < 0.1,
            "omega {omega}: delay {delay} vs {expect}"
        );
    }
}

fn writing_residual(dt: f64, n_z: usize) -> f64 {
    let m = MediumParams::resonant(24.0, 0.0).unwrap();
    let g = TimeGrid::with_spacing(-50.0, 0.0, dt).unwrap();
    let input = make_gaussian(-25.0, 6.0, &g).unwrap();
    // control switched off smoothly mid-pulse so the stage both stores and leaks
    let c = Envelope::from_fn(g, EnvelopeKind::Control, |t| {
        Complex64::new(1.5 * (0.5 - 0.5 * (t / 6.0 + 3.0).tanh()), 0.0)
    })
    .unwrap();
    let opts = SolverOptions {
        n_z,
        max_dt: Some(dt),
        ..Default::default()
    };
    let empty = SpinWave::zeros(SpaceGrid::new(n_z).unwrap());
    let rec = propagate_stage(&m, &c, &empty, Some(&input), &opts).unwrap();
    assert!(rec.final_spin.norm_sqr() > 0.1 && rec.leak_energy > 0.01);
    energy_balance(&rec)
}

#[test]
fn energy_balance_converges_under_refinement() {
    let coarse = writing_residual(0.02, 200);
    let fine = writing_residual(0.01, 400);
    let default_dt = writing_residual(0.01, 200);
    assert!(default_dt <= 0.01, "residual {default_dt}");
    assert!(coarse <= 0.01, "residual {coarse}");
    assert!(fine <= 0.5 * coarse, "residual {coarse} -> {fine}");
}

#[test]
fn dark_storage_factor() {
    // 1 / (2 gamma_s) = 500 us, tau = 100 us
    let m = MediumParams::new(24.0, 1e9, 1e6 / 1000.0, 0.0).unwrap();
    let tau = m.time_from_us(100.0);
    let s = SpinWave::from_fn(SpaceGrid::new(50).unwrap(), |z| Complex64::new(1.0, z));
    let out = dark_storage(&s, tau, m.gamma_s_dimless()).unwrap();
    let f = out.norm_sqr() / s.norm_sqr();
    assert!((f - (-0.2f64).exp()).abs() < 1e-12, "factor {f}");
    assert!((f - 0.8187).abs() < 1e-4);
    let same = dark_storage(&s, 0.0, m.gamma_s_dimless()).unwrap();
    assert_eq!(same.samples(), s.samples());
    let none = dark_storage(&s, tau, 0.0).unwrap();
    assert_eq!(none.samples(), s.samples());
}

#[test]
fn large_depth_retrieval_approaches_unity() {
    let mut last = 0.0;
    for alpha_l in [100.0, 200.0, 400.0] {
        let m = MediumParams::resonant(alpha_l, 0.0).unwrap();
        let n_z = 1000;
        let s = SpinWave::from_fn(SpaceGrid::new(n_z).unwrap(), |z| Complex64::new(z, 0.0));
        let g = TimeGrid::with_spacing(0.0, 40.0, 0.02).unwrap();
        let c = Envelope::constant(g, Complex64::new(4.0, 0.0), EnvelopeKind::Control);
        let opts = SolverOptions {
            n_z,
            ..Default::default()
        };
        let out = retrieve(&m, &s, &c, &opts).unwrap();
        let eta = out.energy() / s.norm_sqr();
        assert!(eta > last, "alpha_l {alpha_l}: {eta} after {last}");
        last = eta;
    }
    assert!(last >= 0.98, "d = 200 retrieves {last}");
}
