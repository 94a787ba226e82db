//! Antenna gain pattern, free-space loss, terrestrial path loss and thermal noise.

use serde::{Deserialize, Serialize};

use crate::special::{j1_over_x, j3_over_x3};
use crate::{Error, Result};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Scale of the pattern argument: μ = 2.07123 sin θ / sin θ_3dB.
pub const PATTERN_MU_SCALE: f64 = 2.07123;

/// Parabolic aperture antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSpec {
    pub diameter_m: f64,
    pub efficiency: f64,
    pub frequency_hz: f64,
    /// One-sided 3 dB angle, degrees.
    pub theta_3db_deg: f64,
}

impl AntennaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_m > 0.0) {
            return Err(Error::invalid("diameter_m", "must be positive"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("efficiency", "must be in (0, 1]"));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(Error::invalid("frequency_hz", "must be positive"));
        }
        if !(self.theta_3db_deg > 0.0 && self.theta_3db_deg < 90.0) {
            return Err(Error::invalid("theta_3db_deg", "must be in (0, 90)"));
        }
        Ok(())
    }

    /// Conventional 3 dB angle of a uniformly illuminated dish, `35 λ/D` degrees
    /// one-sided (half of the familiar 70 λ/D beamwidth).
    pub fn nominal_theta_3db_deg(diameter_m: f64, frequency_hz: f64) -> f64 {
        35.0 * SPEED_OF_LIGHT / frequency_hz / diameter_m
    }
}

/// Noise bandwidth and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    #[serde(default = "default_boltzmann")]
    pub boltzmann: f64,
}

fn default_boltzmann() -> f64 {
    BOLTZMANN
}

impl NoiseSpec {
    pub fn new(bandwidth_hz: f64, temperature_k: f64) -> Self {
        NoiseSpec {
            bandwidth_hz,
            temperature_k,
            boltzmann: BOLTZMANN,
        }
    }
}

/// `G_0 = ξ (π D f / c)²`.
pub fn boresight_gain(spec: &AntennaSpec) -> f64 {
    let x = std::f64::consts::PI * spec.diameter_m * spec.frequency_hz / SPEED_OF_LIGHT;
    spec.efficiency * x * x
}

/// `G_0 [J_1(μ)/(2μ) + 36 J_3(μ)/μ³]²` with `μ = 2.07123 sin θ / sin θ_3dB`.
///
/// The bracket is evaluated through the regular functions `J_1(μ)/μ` and
/// `J_3(μ)/μ³`, so θ = 0 returns `G_0` exactly.
pub fn pattern_gain(spec: &AntennaSpec, theta_deg: f64) -> f64 {
    let mu = PATTERN_MU_SCALE * theta_deg.to_radians().sin() / spec.theta_3db_deg.to_radians().sin();
    let bracket = 0.5 * j1_over_x(mu) + 36.0 * j3_over_x3(mu);
    boresight_gain(spec) * bracket * bracket
}

/// `(c / (4π d f))²` with `d` in km.
pub fn free_space_loss(d_km: f64, frequency_hz: f64) -> f64 {
    let x = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d_km * 1e3 * frequency_hz);
    x * x
}

/// `k_B B T` in W.
pub fn noise_power(spec: &NoiseSpec) -> f64 {
    spec.boltzmann * spec.bandwidth_hz * spec.temperature_k
}

/// `d^{−α_t}` with `d` in km.
pub fn terrestrial_path_gain(d_km: f64, alpha_t: f64) -> f64 {
    d_km.powf(-alpha_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sat_antenna() -> AntennaSpec {
        AntennaSpec {
            diameter_m: 0.4,
            efficiency: 0.55,
            frequency_hz: 17.9e9,
            theta_3db_deg: 2.0,
        }
    }

    #[test]
    fn unit_boresight_gain() {
        let spec = AntennaSpec {
            diameter_m: SPEED_OF_LIGHT / (std::f64::consts::PI * 17.9e9),
            efficiency: 1.0,
            frequency_hz: 17.9e9,
            theta_3db_deg: 1.0,
        };
        assert!((boresight_gain(&spec) - 1.0).abs() < 1e-12);
        let mut big = sat_antenna();
        let g = boresight_gain(&big);
        big.diameter_m *= 2.0;
        assert!((boresight_gain(&big) / g - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pattern_boresight_exact() {
        let spec = sat_antenna();
        assert_eq!(pattern_gain(&spec, 0.0), boresight_gain(&spec));
    }

    #[test]
    fn noise_scaling() {
        let n = noise_power(&NoiseSpec::new(125e6, 290.0));
        assert!((noise_power(&NoiseSpec::new(250e6, 290.0)) / n - 2.0).abs() < 1e-12);
        assert_eq!(noise_power(&NoiseSpec::new(125e6, 0.0)), 0.0);
    }

    #[test]
    fn terrestrial_power_law() {
        assert_eq!(terrestrial_path_gain(1.0, 3.5), 1.0);
        assert!((terrestrial_path_gain(10.0, 2.0) - 0.01).abs() < 1e-15);
    }
}
