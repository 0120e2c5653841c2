use std::sync::OnceLock;

use approx::assert_relative_eq;
use eit_memory::metrics::{hom_and_fidelity, overlap, MetricsReport};
use eit_memory::optimal::{optimal_mode, OptimalModeConfig};
use eit_memory::pulses::{make_gaussian, make_time_bin};
use eit_memory::shaping::{solve_clock, time_reverse, universal_retrieval_mode, UniversalMode, UniversalModeOptions};
use eit_memory::solver::{propagate_stage, SolverOptions};
use eit_memory::{Envelope, EnvelopeKind, MediumParams, SpaceGrid, SpinWave, TimeGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> TimeGrid {
    TimeGrid::with_spacing(0.0, 50.0, 0.02).unwrap()
}

fn mode_d12() -> &'static UniversalMode {
    static MODE: OnceLock<UniversalMode> = OnceLock::new();
    MODE.get_or_init(|| {
        let m = MediumParams::resonant(24.0, 0.0).unwrap();
        let s = optimal_mode(&m, &OptimalModeConfig::default()).unwrap().mode;
        universal_retrieval_mode(&m, &s, &UniversalModeOptions::default()).unwrap()
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64)
        .prop_filter("nonzero", |(a, b)| a.hypot(*b) > 0.05)
        .prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #[test]
    fn overlap_is_symmetric_and_scale_free(
        c1 in 10.0..40.0f64, s1 in 2.0..8.0f64,
        c2 in 10.0..40.0f64, s2 in 2.0..8.0f64,
        a in complex(), b in complex(),
    ) {
        let g = grid();
        let x = make_gaussian(c1, s1, &g).unwrap();
        let y = make_gaussian(c2, s2, &g).unwrap();
        let xy = overlap(&x, &y).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&xy));
        prop_assert!((xy - overlap(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((xy - overlap(&x.scaled(a), &y.scaled(b)).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn energy_survives_translation(c in 15.0..35.0f64, s in 2.0..5.0f64, shift in -10.0..10.0f64) {
        let g = grid();
        let x = make_gaussian(c, s, &g).unwrap();
        prop_assert!((x.energy() - 1.0).abs() < 1e-9);
        prop_assert!((x.shifted(shift).energy() - x.energy()).abs() < 1e-9);
    }

    #[test]
    fn metrics_report_identities(eta in 0.0..=1.0f64, j2 in 0.0..=1.0f64) {
        let r = MetricsReport::new(eta, j2);
        let (f, hom) = hom_and_fidelity(eta, j2);
        prop_assert_eq!(r.fidelity, eta * j2);
        prop_assert_eq!(f, r.fidelity);
        prop_assert!((hom - (1.0 - j2) / 2.0).abs() < 1e-15);
        prop_assert!((0.0..=0.5).contains(&hom));
    }

    #[test]
    fn time_reverse_is_an_involution(c in 10.0..40.0f64, s in 1.0..6.0f64, pivot in -20.0..20.0f64) {
        let x = make_gaussian(c, s, &grid()).unwrap().scaled(Complex64::new(0.3, 1.1));
        let back = time_reverse(&time_reverse(&x, pivot), pivot);
        prop_assert!(back.grid().matches(x.grid()));
        prop_assert_eq!(back.samples(), x.samples());
    }

    #[test]
    fn time_bin_ratio_is_tan_squared(theta in 0.1..1.45f64, phi in -3.0..3.0f64) {
        let g = TimeGrid::with_spacing(0.0, 100.0, 0.02).unwrap();
        let tb = make_time_bin(theta, phi, 3.5, 42.0, &g).unwrap();
        let mid = 0.5 * (g.t_start() + g.t_end());
        let half = |lo: f64, hi: f64| {
            let w: Vec<f64> = tb.times_intensity(lo, hi);
            w.iter().sum::<f64>()
        };
        let ratio = half(mid, g.t_end()) / half(g.t_start(), mid);
        prop_assert!((ratio / theta.tan().powi(2) - 1.0).abs() < 1e-6);
    }
}

trait WindowEnergy {
    fn times_intensity(&self, lo: f64, hi: f64) -> Vec<f64>;
}

impl WindowEnergy for Envelope {
    fn times_intensity(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.grid()
            .times()
            .zip(self.intensities())
            .filter(|(t, _)| *t >= lo && *t < hi)
            .map(|(_, w)| w)
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn clock_is_monotone_and_integrates_the_control(c in 12.0..38.0f64, s in 3.0..8.0f64) {
        let target = make_gaussian(c, s, &grid()).unwrap();
        let clock = solve_clock(mode_d12(), &target, 10.0).unwrap();
        prop_assert!(clock.h.windows(2).all(|p| p[1] >= p[0]));
        // independent trapezoid running sum of |Omega|^2
        let dt = grid().dt();
        let w = clock.omega.intensities();
        let mut acc = clock.h[0];
        for i in 1..w.len() {
            acc += 0.5 * dt * (w[i - 1] + w[i]);
            prop_assert!((acc - clock.h[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn solver_is_linear(
        a in complex(), b in complex(),
        c1 in 4.0..10.0f64, c2 in 4.0..10.0f64,
        omega in 0.2..2.0f64,
    ) {
        let m = MediumParams::resonant(6.0, 0.01).unwrap();
        let g = TimeGrid::with_spacing(0.0, 15.0, 0.02).unwrap();
        let space = SpaceGrid::new(40).unwrap();
        let opts = SolverOptions { n_z: 40, ..Default::default() };
        let ctrl = Envelope::from_fn(g, EnvelopeKind::Control, |t| Complex64::new(omega * (1.0 + 0.3 * (t / 3.0).sin()), 0.0)).unwrap();
        let x = make_gaussian(c1, 1.5, &g).unwrap();
        let y = make_gaussian(c2, 2.0, &g).unwrap().scaled(Complex64::new(0.0, 1.0));
        let sx = SpinWave::from_fn(space, |z| Complex64::new(z, 0.0));
        let sy = SpinWave::from_fn(space, |z| Complex64::new(0.5, z * z));
        let run = |e: &Envelope, s: &SpinWave| propagate_stage(&m, &ctrl, s, Some(e), &opts).unwrap();
        let rx = run(&x, &sx);
        let ry = run(&y, &sy);
        let mix = |u: &[Complex64], v: &[Complex64]| -> Vec<Complex64> { u.iter().zip(v).map(|(p, q)| a * p + b * q).collect() };
        let e = Envelope::new(g, mix(x.samples(), y.samples()), EnvelopeKind::Signal).unwrap();
        let s = SpinWave::new(space, mix(sx.samples(), sy.samples())).unwrap();
        let r = run(&e, &s);
        let want_out = mix(rx.out_envelope.samples(), ry.out_envelope.samples());
        let want_spin = mix(rx.final_spin.samples(), ry.final_spin.samples());
        let scale = want_out.iter().chain(&want_spin).map(|z| z.norm()).fold(0.0, f64::max);
        for (p, q) in r.out_envelope.samples().iter().zip(&want_out) {
            prop_assert!((p - q).norm() <= 1e-8 * scale);
        }
        for (p, q) in r.final_spin.samples().iter().zip(&want_spin) {
            prop_assert!((p - q).norm() <= 1e-8 * scale);
        }
    }
}

#[test]
fn spin_norm_converges_under_refinement() {
    let f = |z: f64| Complex64::new((3.0 * z).cos(), z);
    let exact = {
        // int_0^1 cos^2(3z) + z^2 dz
        0.5 + (6.0f64).sin() / 12.0 + 1.0 / 3.0
    };
    let err = |n: usize| (SpinWave::from_fn(SpaceGrid::new(n).unwrap(), f).norm_sqr() - exact).abs();
    let (e1, e2) = (err(50), err(100));
    assert_relative_eq!(e1 / e2, 4.0, max_relative = 0.05);
}
