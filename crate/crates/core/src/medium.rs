use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default optical polarization decay rate in rad/s; only used to convert physical inputs.
pub const DEFAULT_GAMMA: f64 = 1.0e9;

/// Homogeneously broadened Lambda-medium parameters.
///
/// `gamma` and `gamma_s` are physical rates (rad/s); `delta` is the one-photon
/// detuning in units of `gamma`. The simulation works with the dimensionless
/// coupling depth `d = alpha_l / 2` and spin decay `gamma_s / gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    alpha_l: f64,
    gamma: f64,
    gamma_s: f64,
    delta: f64,
}

impl MediumParams {
    pub fn new(alpha_l: f64, gamma: f64, gamma_s: f64, delta: f64) -> Result<Self> {
        if !(alpha_l >= 0.0 && alpha_l.is_finite()) {
            return Err(Error::invalid(format!("alphaL must be >= 0, got {alpha_l}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
        }
        if !(gamma_s >= 0.0 && gamma_s.is_finite()) {
            return Err(Error::invalid(format!("gamma_s must be >= 0, got {gamma_s}")));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        Ok(Self {
            alpha_l,
            gamma,
            gamma_s,
            delta,
        })
    }

    /// Resonant medium with spin decay already expressed in units of `gamma`.
    pub fn resonant(alpha_l: f64, gamma_s_dimless: f64) -> Result<Self> {
        Self::new(alpha_l, DEFAULT_GAMMA, gamma_s_dimless * DEFAULT_GAMMA, 0.0)
    }

    pub fn alpha_l(&self) -> f64 {
        self.alpha_l
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Coupling depth; CW transmission with the control off is `exp(-2 d)`.
    pub fn d(&self) -> f64 {
        0.5 * self.alpha_l
    }

    /// Spin decay rate in units of `gamma`.
    pub fn gamma_s_dimless(&self) -> f64 {
        self.gamma_s / self.gamma
    }

    pub fn with_alpha_l(self, alpha_l: f64) -> Result<Self> {
        Self::new(alpha_l, self.gamma, self.gamma_s, self.delta)
    }

    pub fn without_spin_decay(self) -> Self {
        Self { gamma_s: 0.0, ..self }
    }

    /// Microseconds to dimensionless time.
    pub fn time_from_us(&self, us: f64) -> f64 {
        us * 1e-6 * self.gamma
    }

    /// Dimensionless time to microseconds.
    pub fn time_to_us(&self, t: f64) -> f64 {
        t / self.gamma * 1e6
    }

    /// A rate given in 1/us, converted to units of `gamma`.
    pub fn rate_from_per_us(&self, per_us: f64) -> f64 {
        per_us * 1e6 / self.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid() {
        assert!(MediumParams::new(-1.0, 1.0, 0.0, 0.0).is_err());
        assert!(MediumParams::new(24.0, 0.0, 0.0, 0.0).is_err());
        assert!(MediumParams::new(24.0, 1.0, -1.0, 0.0).is_err());
        assert!(MediumParams::new(f64::NAN, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn coupling_depth_is_half_optical_depth() {
        let m = MediumParams::new(24.0, 1e9, 1e3, 0.0).unwrap();
        assert_eq!(m.d(), 12.0);
        assert!((m.gamma_s_dimless() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn physical_conversions_round_trip() {
        let m = MediumParams::new(24.0, 1e9, 1e3, 0.0).unwrap();
        let tau = m.time_from_us(100.0);
        assert!((tau - 1e5).abs() < 1e-6);
        assert!((m.time_to_us(tau) - 100.0).abs() < 1e-9);
        // 1/(2 gamma_s) = 500 us  =>  gamma_s = 1e-3 per us
        assert!((m.rate_from_per_us(1e-3) * tau - 0.1).abs() < 1e-12);
    }
}
