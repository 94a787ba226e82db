//! Fading models and traffic states.
//!
//! Satellite links follow the Shadowed-Rician model: a complex Gaussian scatter
//! component of power `2b` plus a line-of-sight component whose power is
//! Nakagami-`m` shadowed with mean `Ω`. Terrestrial links are Rayleigh.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::{factorial, gamma_p_int, ln_factorial, ln_hyp1f1_b1};
use crate::{Error, Result};

/// Independent, reproducible random stream for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shadowed-Rician parameters `(b, m, Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowedRicianParams {
    /// Half of the average scattered power.
    pub b: f64,
    /// Nakagami shadowing parameter.
    pub m: f64,
    /// Average line-of-sight power.
    pub omega: f64,
}

impl ShadowedRicianParams {
    pub fn new(b: f64, m: f64, omega: f64) -> Result<Self> {
        let p = ShadowedRicianParams { b, m, omega };
        p.validate()?;
        Ok(p)
    }

    /// Average shadowing: `b = 0.126` (scattered power `2b`), `m = 10.1`, `Ω = 0.835`.
    pub fn standard() -> Self {
        ShadowedRicianParams {
            b: 0.126,
            m: 10.1,
            omega: 0.835,
        }
    }

    /// [`Self::standard`] with `m` rounded to 10 for the closed forms.
    pub fn standard_integer() -> Self {
        ShadowedRicianParams {
            m: 10.0,
            ..Self::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid("b", "must be positive"));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::invalid("m", "must be positive"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega", "must be >= 0"));
        }
        Ok(())
    }

    /// Copy with `m` rounded to the nearest positive integer.
    pub fn rounded(&self) -> Self {
        ShadowedRicianParams {
            m: self.m.round().max(1.0),
            ..*self
        }
    }

    pub fn alpha(&self) -> f64 {
        let two_bm = 2.0 * self.b * self.m;
        (two_bm / (two_bm + self.omega)).powf(self.m) / (2.0 * self.b)
    }

    pub fn beta(&self) -> f64 {
        1.0 / (2.0 * self.b)
    }

    pub fn delta(&self) -> f64 {
        self.omega / (2.0 * self.b * (2.0 * self.b * self.m + self.omega))
    }

    /// `β − δ`, the decay rate of the integer-`m` expansion.
    pub fn epsilon(&self) -> f64 {
        self.beta() - self.delta()
    }

    pub fn mean(&self) -> f64 {
        2.0 * self.b + self.omega
    }

    /// `m` as an integer, or [`Error::NonIntegerM`].
    pub fn integer_m(&self) -> Result<usize> {
        if self.m >= 1.0 && self.m.fract() == 0.0 && self.m < 1e6 {
            Ok(self.m as usize)
        } else {
            Err(Error::NonIntegerM(self.m))
        }
    }

    /// Coefficients `c_n = (m−1)! δⁿ / ((m−1−n)! (n!)²)` of the integer-`m`
    /// density `α e^{−εx} Σ c_n xⁿ`.
    pub fn series_coefficients(&self) -> Result<Vec<f64>> {
        let m = self.integer_m()?;
        let delta = self.delta();
        Ok((0..m)
            .map(|n| {
                let ln = ln_factorial(m - 1) - ln_factorial(m - 1 - n) - 2.0 * ln_factorial(n);
                if n == 0 {
                    1.0
                } else {
                    (ln + n as f64 * delta.ln()).exp()
                }
            })
            .collect())
    }
}

/// Density of `|h|²`.
///
/// Integer `m` uses the finite expansion; other values sum the confluent
/// hypergeometric series.
pub fn sr_pdf(params: &ShadowedRicianParams, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let alpha = params.alpha();
    match params.series_coefficients() {
        Ok(c) => {
            let poly = c.iter().rev().fold(0.0, |acc, &cn| acc * x + cn);
            alpha * (-params.epsilon() * x).exp() * poly
        }
        Err(_) => {
            let z = params.delta() * x;
            (alpha.ln() - params.beta() * x + ln_hyp1f1_b1(params.m, z)).exp()
        }
    }
}

/// Distribution function of `|h|²` for integer `m`:
/// `Σ_n Z_n P(n+1, εx)` with `Z_n = α c_n n! / ε^{n+1}`.
pub fn sr_cdf(params: &ShadowedRicianParams, x: f64) -> Result<f64> {
    let c = params.series_coefficients()?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let alpha = params.alpha();
    let eps = params.epsilon();
    let sum: f64 = c
        .iter()
        .enumerate()
        .map(|(n, &cn)| alpha * cn * factorial(n) / eps.powi(n as i32 + 1) * gamma_p_int(n + 1, eps * x))
        .sum();
    Ok(sum.clamp(0.0, 1.0))
}

/// Reusable Shadowed-Rician sampler.
#[derive(Debug, Clone)]
pub struct SrSampler {
    scatter_sd: f64,
    shadowing: Option<Gamma<f64>>,
}

impl SrSampler {
    pub fn new(params: &ShadowedRicianParams) -> Self {
        let shadowing = if params.omega > 0.0 {
            Some(Gamma::new(params.m, params.omega / params.m).expect("validated parameters"))
        } else {
            None
        };
        SrSampler {
            scatter_sd: params.b.sqrt(),
            shadowing,
        }
    }

    /// `|g + A e^{jφ}|²` with `g ~ CN(0, 2b)`, `A² ~ Gamma(m, Ω/m)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let gr: f64 = rng.sample::<f64, _>(StandardNormal) * self.scatter_sd;
        let gi: f64 = rng.sample::<f64, _>(StandardNormal) * self.scatter_sd;
        match &self.shadowing {
            None => gr * gr + gi * gi,
            Some(gamma) => {
                let a = gamma.sample(rng).sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                let (s, c) = phi.sin_cos();
                let re = gr + a * c;
                let im = gi + a * s;
                re * re + im * im
            }
        }
    }
}

pub fn sr_sample<R: Rng + ?Sized>(params: &ShadowedRicianParams, rng: &mut R) -> f64 {
    SrSampler::new(params).sample(rng)
}

/// Rayleigh fading with average power `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayleighParams {
    pub mean_power: f64,
}

impl RayleighParams {
    pub fn new(mean_power: f64) -> Result<Self> {
        if !(mean_power > 0.0 && mean_power.is_finite()) {
            return Err(Error::invalid("mean_power", "must be positive"));
        }
        Ok(RayleighParams { mean_power })
    }

    /// Unit mean power.
    pub fn standard() -> Self {
        RayleighParams { mean_power: 1.0 }
    }
}

/// Exponentially distributed `|h|²` with mean `σ²`.
pub fn rayleigh_sample<R: Rng + ?Sized>(params: &RayleighParams, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e * params.mean_power
}

/// Poisson traffic arrivals per beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModel {
    /// Mean arrivals per second.
    pub arrival_rate: f64,
    pub slot_duration_s: f64,
}

impl TrafficModel {
    /// Probability of at least one arrival in a slot, `1 − e^{−λ·slot}`.
    pub fn busy_probability(&self) -> f64 {
        -(-self.arrival_rate * self.slot_duration_s).exp_m1()
    }
}

/// Draws α for `n_beams` beams.
pub fn draw_traffic_states<R: Rng + ?Sized>(model: &TrafficModel, n_beams: usize, rng: &mut R) -> Vec<bool> {
    let p = model.busy_probability();
    (0..n_beams).map(|_| rng.random::<f64>() < p).collect()
}
