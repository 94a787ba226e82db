//! Time-correlated fading sequences for CSI prediction experiments.
//!
//! Satellite links: an AR(1) complex Gaussian scatter component of power `2b`
//! plus a line-of-sight amplitude `A` with `A² = (Ω/2m) Σ X_i²` over `2m`
//! AR(1) unit Gaussians, so `A²` is Gamma(m, Ω/m) at every slot. The LOS phase
//! is fixed per link. Each slot is therefore Shadowed-Rician distributed with
//! `m` rounded to the nearest half-integer. Terrestrial links are AR(1)
//! complex Gaussian, i.e. Rayleigh at every slot.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{rng_stream, RayleighParams, ShadowedRicianParams};
use crate::geometry::{System, UserClass};
use crate::link::{LinkId, Transmitter};

/// Generator of correlated fading series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiSynthesizer {
    /// Slot-to-slot correlation of the underlying Gaussian processes.
    pub correlation: f64,
    pub satellite: ShadowedRicianParams,
    pub terrestrial: RayleighParams,
}

/// Stable random-stream index of a link.
pub fn link_stream(link: &LinkId) -> u64 {
    let (kind, sys, idx) = match link.tx {
        Transmitter::Sat(System::Ngso1, i) => (0u64, 0u64, i as u64),
        Transmitter::Sat(System::Ngso2, i) => (0, 1, i as u64),
        Transmitter::Bs(i) => (1, 0, i as u64),
    };
    let class = match link.class {
        UserClass::Ngso1 => 0u64,
        UserClass::Ngso2 => 1,
        UserClass::Bs => 2,
    };
    (((kind * 2 + sys) << 24 | idx) << 2 | class) << 24 | link.user as u64
}

struct Ar1 {
    rho: f64,
    innov: f64,
    state: f64,
}

impl Ar1 {
    fn new(rho: f64, rng: &mut ChaCha8Rng) -> Self {
        Ar1 {
            rho,
            innov: (1.0 - rho * rho).max(0.0).sqrt(),
            state: rng.sample(StandardNormal),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.state = self.rho * self.state + self.innov * z;
        self.state
    }
}

impl CsiSynthesizer {
    /// Shadowed-Rician `|h|²` sequence of length `len`.
    pub fn satellite_series(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let p = self.satellite;
        let dof = (2.0 * p.m).round().max(1.0) as usize;
        let sd = p.b.sqrt();
        let mut gr = Ar1::new(self.correlation, rng);
        let mut gi = Ar1::new(self.correlation, rng);
        let mut los: Vec<Ar1> = (0..dof).map(|_| Ar1::new(self.correlation, rng)).collect();
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let (s, c) = phase.sin_cos();
        let mut out = Vec::with_capacity(len);
        let mut first = true;
        for _ in 0..len {
            let (xr, xi, a2) = if first {
                first = false;
                (gr.state, gi.state, los.iter().map(|x| x.state * x.state).sum::<f64>())
            } else {
                (gr.step(rng), gi.step(rng), los.iter_mut().map(|x| x.step(rng).powi(2)).sum::<f64>())
            };
            let a = (p.omega * a2 / dof as f64).sqrt();
            let re = sd * xr + a * c;
            let im = sd * xi + a * s;
            out.push(re * re + im * im);
        }
        out
    }

    /// Rayleigh `|h|²` sequence of length `len`.
    pub fn terrestrial_series(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let sd = (self.terrestrial.mean_power / 2.0).sqrt();
        let mut gr = Ar1::new(self.correlation, rng);
        let mut gi = Ar1::new(self.correlation, rng);
        let mut out = Vec::with_capacity(len);
        for t in 0..len {
            let (a, b) = if t == 0 { (gr.state, gi.state) } else { (gr.step(rng), gi.step(rng)) };
            out.push(sd * sd * (a * a + b * b));
        }
        out
    }

    /// The sequence of one link; identical for identical `(seed, link, len)`.
    pub fn series(&self, link: &LinkId, seed: u64, len: usize) -> Vec<f64> {
        let mut rng = rng_stream(seed, link_stream(link));
        match link.tx {
            Transmitter::Sat(..) => self.satellite_series(&mut rng, len),
            Transmitter::Bs(_) => self.terrestrial_series(&mut rng, len),
        }
    }
}
