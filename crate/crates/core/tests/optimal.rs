use eit_memory::optimal::{efficiency_sweep, kernel_oracle, optimal_mode, OptimalModeConfig};
use eit_memory::pulses::{make_ramp, RampSign};
use eit_memory::{Error, MediumParams, TimeGrid};

#[test]
fn efficiency_grows_with_depth() {
    let base = MediumParams::resonant(24.0, 0.0).unwrap();
    let rows = efficiency_sweep(&base, &[6.0, 12.0, 24.0, 48.0], &OptimalModeConfig::default()).unwrap();
    let etas: Vec<f64> = rows.iter().map(|(_, r)| r.eta_max).collect();
    assert!(etas.windows(2).all(|p| p[1] > p[0]), "{etas:?}");
    assert!(etas[3] < 1.0);
}

#[test]
fn iteration_history_is_non_decreasing() {
    let m = MediumParams::resonant(24.0, 0.0).unwrap();
    let r = optimal_mode(&m, &OptimalModeConfig::default()).unwrap();
    assert!(r.iterations <= 50);
    assert!(
        r.convergence_history.windows(2).all(|p| p[1] >= p[0] - 1e-12),
        "{:?}",
        r.convergence_history
    );
    assert!((r.eta_max - 0.55).abs() <= 0.02, "eta_max {}", r.eta_max);
}

#[test]
fn ramp_seed_finds_the_gaussian_seed_mode() {
    let m = MediumParams::resonant(24.0, 0.0).unwrap();
    let a = optimal_mode(&m, &OptimalModeConfig::default()).unwrap();
    let g = TimeGrid::with_spacing(-50.0, 0.0, 0.02).unwrap();
    let cfg = OptimalModeConfig {
        seed: Some(make_ramp(RampSign::Positive, 40.0, &g).unwrap()),
        ..Default::default()
    };
    let b = optimal_mode(&m, &cfg).unwrap();
    assert!(a.mode.overlap(&b.mode).unwrap() >= 0.999);
    assert!((a.eta_max - b.eta_max).abs() < 1e-3);
}

#[test]
fn oracle_singular_value_is_bounded() {
    for alpha_l in [2.0, 24.0] {
        let o = kernel_oracle(&MediumParams::resonant(alpha_l, 0.0).unwrap(), 60).unwrap();
        assert!(o.eta_max > 0.0 && o.eta_max <= 1.0);
    }
    let zero = kernel_oracle(&MediumParams::resonant(0.0, 0.0).unwrap(), 60).unwrap();
    assert_eq!(zero.eta_max, 0.0);
}

#[test]
fn iteration_cap_reports_history() {
    let m = MediumParams::resonant(24.0, 0.0).unwrap();
    let cfg = OptimalModeConfig {
        max_iter: 2,
        tol: 1e-12,
        ..Default::default()
    };
    match optimal_mode(&m, &cfg) {
        Err(Error::NonConvergence { history }) => assert_eq!(history.len(), 2),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}
