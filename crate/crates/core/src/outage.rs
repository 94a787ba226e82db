//! Outage probability `Pr(SINR < φ_th)`: closed forms, high-power asymptotes
//! and a parallel Monte Carlo estimator.
//!
//! For a Shadowed-Rician victim with integer `m` the outage event is
//! `X < u` with `u = s + Σ ζ_m X_m + Σ I_i Y_i`, where `s = φ N / (P g)`,
//! `ζ_m = φ P_m g_m / (P g)` and `I_i = φ P_i g_i / (P g)`. Writing the victim
//! distribution as `F(u) = Σ_n Z_n P(n+1, εu)` gives
//!
//! `OP = 1 − e^{−εs} Σ_n Z_n Σ_{k≤n} ε^k/k! Σ_{j≤k} Σ_{z≤j} C(k,j) C(j,z) s^{j−z} M_A(k−j) M_B(z)`
//!
//! with `M_A(a) = E[(Σ ζ_m X_m)^a e^{−ε Σ ζ_m X_m}]` and
//! `M_B(b) = E[(Σ I_i Y_i)^b e^{−ε Σ I_i Y_i}]`, each expanded by the
//! multinomial theorem over weak compositions of the exponent.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{rayleigh_sample, rng_stream, RayleighParams, ShadowedRicianParams, SrSampler};
use crate::geometry::UserClass;
use crate::special::{binomial, composition_count, factorial, for_each_composition, ln_factorial, ln_multinomial};
use crate::{Error, Result};

/// Default cap on the number of composition terms enumerated by the closed forms.
pub const DEFAULT_TERM_BUDGET: u64 = 1_000_000;

/// Fading law of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    ShadowedRician(ShadowedRicianParams),
    Rayleigh(RayleighParams),
}

impl Fading {
    pub fn mean(&self) -> f64 {
        match self {
            Fading::ShadowedRician(p) => p.mean(),
            Fading::Rayleigh(p) => p.mean_power,
        }
    }
}

/// Transmit power and combined gain-loss product `G_t G_r L` of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub power_w: f64,
    pub gain: f64,
    pub fading: Fading,
}

impl LinkParams {
    /// Mean received power at unit fading.
    pub fn strength(&self) -> f64 {
        self.power_w * self.gain
    }
}

/// Inputs shared by the analytic and Monte Carlo evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageQuery {
    pub desired: LinkParams,
    /// Satellite interferers; their fading must be Shadowed-Rician.
    pub ngso_interferers: Vec<LinkParams>,
    /// Terrestrial interferers; their fading must be Rayleigh.
    pub bs_interferers: Vec<LinkParams>,
    pub noise_w: f64,
    /// SINR threshold φ_th, linear.
    pub threshold: f64,
}

impl OutageQuery {
    pub fn with_threshold(&self, threshold: f64) -> Self {
        OutageQuery {
            threshold,
            ..self.clone()
        }
    }

    pub fn with_desired_power(&self, power_w: f64) -> Self {
        let mut q = self.clone();
        q.desired.power_w = power_w;
        q
    }

    /// SINR for one draw of the fading gains.
    pub fn sinr(&self, desired: f64, ngso: &[f64], bs: &[f64]) -> f64 {
        let i_ngso: f64 = self.ngso_interferers.iter().zip(ngso).map(|(l, h)| l.strength() * h).sum();
        let i_bs: f64 = self.bs_interferers.iter().zip(bs).map(|(l, h)| l.strength() * h).sum();
        self.desired.strength() * desired / (i_ngso + i_bs + self.noise_w)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("threshold", "must be positive"));
        }
        if !(self.desired.strength() > 0.0) {
            return Err(Error::invalid("desired", "power and gain must be positive"));
        }
        if self.noise_w < 0.0 {
            return Err(Error::invalid("noise_w", "must be >= 0"));
        }
        for l in self.ngso_interferers.iter().chain(&self.bs_interferers) {
            if l.power_w < 0.0 || l.gain < 0.0 {
                return Err(Error::invalid("interferer", "power and gain must be >= 0"));
            }
        }
        if self.ngso_interferers.iter().any(|l| !matches!(l.fading, Fading::ShadowedRician(_))) {
            return Err(Error::UnsupportedQuery("satellite interferers must be Shadowed-Rician".into()));
        }
        if self.bs_interferers.iter().any(|l| !matches!(l.fading, Fading::Rayleigh(_))) {
            return Err(Error::UnsupportedQuery("terrestrial interferers must be Rayleigh".into()));
        }
        Ok(())
    }

    fn sr_interferers(&self) -> impl Iterator<Item = (&LinkParams, &ShadowedRicianParams)> {
        self.ngso_interferers.iter().map(|l| match &l.fading {
            Fading::ShadowedRician(p) => (l, p),
            Fading::Rayleigh(_) => unreachable!("validated"),
        })
    }

    fn bs_means(&self) -> impl Iterator<Item = (&LinkParams, f64)> {
        self.bs_interferers.iter().map(|l| (l, l.fading.mean()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutageMethod {
    Analytic,
    Asymptotic,
    MonteCarlo,
}

impl OutageMethod {
    pub fn label(self) -> &'static str {
        match self {
            OutageMethod::Analytic => "analytic",
            OutageMethod::Asymptotic => "asymptotic",
            OutageMethod::MonteCarlo => "monte-carlo",
        }
    }
}

impl std::str::FromStr for OutageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(OutageMethod::Analytic),
            "asymptotic" | "aop" => Ok(OutageMethod::Asymptotic),
            "monte-carlo" | "mc" => Ok(OutageMethod::MonteCarlo),
            other => Err(Error::invalid("method", format!("unknown outage method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageResult {
    pub probability: f64,
    pub method: OutageMethod,
    pub std_err: Option<f64>,
    pub replicas: Option<u64>,
}

/// Per-interferer moments `E[(ζX)^p e^{−tζX}]` for `p = 0..=max_p`.
fn sr_weighted_moments(zeta: f64, t: f64, params: &ShadowedRicianParams, max_p: usize) -> Result<Vec<f64>> {
    let c = params.series_coefficients()?;
    let alpha = params.alpha();
    let rate = params.epsilon() + t * zeta;
    Ok((0..=max_p)
        .map(|p| {
            if p > 0 && zeta == 0.0 {
                return 0.0;
            }
            let sum: f64 = c
                .iter()
                .enumerate()
                .map(|(n, &cn)| {
                    if cn == 0.0 {
                        0.0
                    } else {
                        cn * (ln_factorial(p + n) - (p + n + 1) as f64 * rate.ln()).exp()
                    }
                })
                .sum();
            alpha * zeta.powi(p as i32) * sum
        })
        .collect())
}

/// `E[(I Y)^p e^{−t I Y}]` for exponential `Y` with mean `σ²`.
fn exp_weighted_moments(i: f64, t: f64, mean: f64, max_p: usize) -> Vec<f64> {
    let inv = 1.0 / mean;
    let rate = t * i + inv;
    (0..=max_p)
        .map(|p| {
            if p > 0 && i == 0.0 {
                return 0.0;
            }
            i.powi(p as i32) * inv * (ln_factorial(p) - (p + 1) as f64 * rate.ln()).exp()
        })
        .collect()
}

/// `E[(Σ_m W_m)^a]`-type mixed moments from per-term moment tables via the
/// multinomial theorem, for `a = 0..=max_a`.
fn mixed_moments(tables: &[Vec<f64>], max_a: usize) -> Vec<f64> {
    (0..=max_a)
        .map(|a| {
            let mut total = 0.0;
            for_each_composition(a, tables.len(), |x| {
                let coef = ln_multinomial(x).exp();
                let prod: f64 = x.iter().zip(tables).map(|(&xi, t)| t[xi]).product();
                total += coef * prod;
            });
            total
        })
        .collect()
}

fn check_budget(max_a: usize, parts: &[usize], budget: u64) -> Result<()> {
    let mut terms: u64 = 0;
    for &n in parts {
        for a in 0..=max_a {
            terms = terms.saturating_add(composition_count(a, n));
        }
    }
    if terms > budget {
        return Err(Error::CombinatorialLimit { terms, budget });
    }
    Ok(())
}

/// Closed-form outage of a Shadowed-Rician victim (NGSO 1 or NGSO 2 user).
pub fn op_sr_analytic(q: &OutageQuery, budget: u64) -> Result<f64> {
    q.validate()?;
    let victim = match &q.desired.fading {
        Fading::ShadowedRician(p) => *p,
        Fading::Rayleigh(_) => {
            return Err(Error::UnsupportedQuery("victim link must be Shadowed-Rician".into()));
        }
    };
    let m = victim.integer_m()?;
    for (_, p) in q.sr_interferers() {
        p.integer_m()?;
    }
    let max_k = m - 1;
    check_budget(max_k, &[q.ngso_interferers.len(), q.bs_interferers.len()], budget)?;

    let scale = q.threshold / q.desired.strength();
    let s = scale * q.noise_w;
    let eps = victim.epsilon();
    let alpha = victim.alpha();
    let c = victim.series_coefficients()?;

    let sr_tables = q
        .sr_interferers()
        .map(|(l, p)| sr_weighted_moments(scale * l.strength(), eps, p, max_k))
        .collect::<Result<Vec<_>>>()?;
    let exp_tables: Vec<Vec<f64>> = q
        .bs_means()
        .map(|(l, mean)| exp_weighted_moments(scale * l.strength(), eps, mean, max_k))
        .collect();
    let ma = mixed_moments(&sr_tables, max_k);
    let mb = mixed_moments(&exp_tables, max_k);

    // E[u^k e^{−ε(u−s)}] for k = 0..=max_k
    let shifted: Vec<f64> = (0..=max_k)
        .map(|k| {
            let mut acc = 0.0;
            for j in 0..=k {
                for z in 0..=j {
                    acc += binomial(k, j) * binomial(j, z) * s.powi((j - z) as i32) * ma[k - j] * mb[z];
                }
            }
            acc
        })
        .collect();

    let mut survival = 0.0;
    for (n, &cn) in c.iter().enumerate() {
        if cn == 0.0 {
            continue;
        }
        let z_n = alpha * cn * factorial(n) / eps.powi(n as i32 + 1);
        let inner: f64 = (0..=n)
            .map(|k| (k as f64 * eps.ln() - ln_factorial(k)).exp() * shifted[k])
            .sum();
        survival += z_n * inner;
    }
    Ok(1.0 - (-eps * s).exp() * survival)
}

/// Closed-form outage of the NGSO 1 user link.
pub fn op_ngso1_analytic(q: &OutageQuery) -> Result<f64> {
    op_sr_analytic(q, DEFAULT_TERM_BUDGET)
}

/// Closed-form outage of the NGSO 2 user link (same structure with roles swapped).
pub fn op_ngso2_analytic(q: &OutageQuery) -> Result<f64> {
    op_sr_analytic(q, DEFAULT_TERM_BUDGET)
}

/// `E[e^{−tX}]` of a Shadowed-Rician gain with integer `m`.
fn sr_laplace(params: &ShadowedRicianParams, t: f64) -> Result<f64> {
    let c = params.series_coefficients()?;
    let rate = params.epsilon() + t;
    Ok(params.alpha()
        * c.iter()
            .enumerate()
            .map(|(n, &cn)| cn * factorial(n) / rate.powi(n as i32 + 1))
            .sum::<f64>())
}

/// High-power asymptote for a Shadowed-Rician victim: the victim density is
/// replaced by its small-argument form `α e^{−βx}`, giving
/// `(α/β) [1 − e^{−βs} Π_m E[e^{−βζ_m X_m}] Π_i 1/(1 + β I_i σ_i²)]`.
pub fn aop_sr(q: &OutageQuery) -> Result<f64> {
    q.validate()?;
    let victim = match &q.desired.fading {
        Fading::ShadowedRician(p) => *p,
        Fading::Rayleigh(_) => {
            return Err(Error::UnsupportedQuery("victim link must be Shadowed-Rician".into()));
        }
    };
    victim.integer_m()?;
    let scale = q.threshold / q.desired.strength();
    let beta = victim.beta();
    let mut laplace = (-beta * scale * q.noise_w).exp();
    for (l, p) in q.sr_interferers() {
        laplace *= sr_laplace(p, beta * scale * l.strength())?;
    }
    for (l, mean) in q.bs_means() {
        laplace /= 1.0 + beta * scale * l.strength() * mean;
    }
    Ok(victim.alpha() / beta * (1.0 - laplace))
}

pub fn aop_ngso1(q: &OutageQuery) -> Result<f64> {
    aop_sr(q)
}

pub fn aop_ngso2(q: &OutageQuery) -> Result<f64> {
    aop_sr(q)
}

fn rayleigh_victim(q: &OutageQuery) -> Result<f64> {
    match &q.desired.fading {
        Fading::Rayleigh(p) => Ok(p.mean_power),
        Fading::ShadowedRician(_) => Err(Error::UnsupportedQuery("victim link must be Rayleigh".into())),
    }
}

/// Closed-form outage of the terrestrial user link:
/// `1 − e^{−D/σ²} Π_sat E[e^{−(A/σ²) X}] Π_{j≠i} 1/(1 + C_j σ_j²/σ²)`.
pub fn op_bs_analytic(q: &OutageQuery) -> Result<f64> {
    q.validate()?;
    let sigma2 = rayleigh_victim(q)?;
    let scale = q.threshold / q.desired.strength();
    let mut laplace = (-scale * q.noise_w / sigma2).exp();
    for (l, p) in q.sr_interferers() {
        laplace *= sr_laplace(p, scale * l.strength() / sigma2)?;
    }
    for (l, mean) in q.bs_means() {
        laplace /= 1.0 + scale * l.strength() * mean / sigma2;
    }
    Ok(1.0 - laplace)
}

/// Linearised terrestrial outage `E[u]/σ²`, exactly proportional to `1/P_i`.
pub fn aop_bs(q: &OutageQuery) -> Result<f64> {
    q.validate()?;
    let sigma2 = rayleigh_victim(q)?;
    let mut mean_load = q.noise_w;
    for (l, p) in q.sr_interferers() {
        mean_load += l.strength() * p.mean();
    }
    for (l, mean) in q.bs_means() {
        mean_load += l.strength() * mean;
    }
    let per_watt = q.threshold * mean_load / (q.desired.gain * sigma2);
    Ok((1.0 / q.desired.power_w) * per_watt)
}

/// Replicas per parallel block.
const MC_BLOCK: u64 = 1 << 16;

enum Draw {
    Sr(SrSampler),
    Rayleigh(RayleighParams),
}

impl Draw {
    fn new(f: &Fading) -> Self {
        match f {
            Fading::ShadowedRician(p) => Draw::Sr(SrSampler::new(p)),
            Fading::Rayleigh(p) => Draw::Rayleigh(*p),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Draw::Sr(s) => s.sample(rng),
            Draw::Rayleigh(p) => rayleigh_sample(p, rng),
        }
    }
}

/// Monte Carlo outage at several thresholds from one set of fading draws.
///
/// Replicas are split into fixed-size blocks; block `b` draws link `l` from
/// the stream `(seed, b·256 + l)`, so results do not depend on the thread count.
pub fn op_monte_carlo_grid(q: &OutageQuery, thresholds: &[f64], replicas: u64, seed: u64) -> Result<Vec<OutageResult>> {
    q.validate()?;
    let links: Vec<&LinkParams> = std::iter::once(&q.desired)
        .chain(&q.ngso_interferers)
        .chain(&q.bs_interferers)
        .collect();
    if links.len() > 256 {
        return Err(Error::UnsupportedQuery("at most 255 interferers".into()));
    }
    let draws: Vec<Draw> = links.iter().map(|l| Draw::new(&l.fading)).collect();
    let strengths: Vec<f64> = links.iter().map(|l| l.strength()).collect();
    let blocks = replicas.div_ceil(MC_BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = MC_BLOCK.min(replicas - b * MC_BLOCK);
            let mut rngs: Vec<_> = (0..links.len() as u64).map(|l| rng_stream(seed, b * 256 + l)).collect();
            let mut counts = vec![0u64; thresholds.len()];
            for _ in 0..n {
                let desired = strengths[0] * draws[0].sample(&mut rngs[0]);
                let mut load = q.noise_w;
                for l in 1..links.len() {
                    load += strengths[l] * draws[l].sample(&mut rngs[l]);
                }
                let sinr = desired / load;
                for (c, &th) in counts.iter_mut().zip(thresholds) {
                    if sinr < th {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; thresholds.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / replicas as f64;
            OutageResult {
                probability: p,
                method: OutageMethod::MonteCarlo,
                std_err: Some((p * (1.0 - p) / replicas as f64).sqrt()),
                replicas: Some(replicas),
            }
        })
        .collect())
}

/// Empirical `Pr(SINR < φ_th)` with its binomial standard error.
pub fn op_monte_carlo(q: &OutageQuery, replicas: u64, seed: u64) -> Result<OutageResult> {
    Ok(op_monte_carlo_grid(q, &[q.threshold], replicas, seed)?.remove(0))
}

/// Evaluates one method for the victim class.
pub fn evaluate(q: &OutageQuery, link: UserClass, method: OutageMethod, replicas: u64, seed: u64) -> Result<OutageResult> {
    let analytic = |p: f64, method| OutageResult {
        probability: p,
        method,
        std_err: None,
        replicas: None,
    };
    match (method, link) {
        (OutageMethod::MonteCarlo, _) => op_monte_carlo(q, replicas, seed),
        (OutageMethod::Analytic, UserClass::Bs) => Ok(analytic(op_bs_analytic(q)?, method)),
        (OutageMethod::Analytic, _) => Ok(analytic(op_sr_analytic(q, DEFAULT_TERM_BUDGET)?, method)),
        (OutageMethod::Asymptotic, UserClass::Bs) => Ok(analytic(aop_bs(q)?, method)),
        (OutageMethod::Asymptotic, _) => Ok(analytic(aop_sr(q)?, method)),
    }
}

/// One row of an outage sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpRow {
    pub phi_th_db: f64,
    pub method: OutageMethod,
    pub link: UserClass,
    pub probability: f64,
    pub std_err: Option<f64>,
    pub replicas: Option<u64>,
    pub seed: u64,
}

/// Outage versus threshold for each method. `thresholds_db` must be ascending;
/// Monte Carlo rows at all thresholds share one set of draws.
pub fn op_sweep(
    q: &OutageQuery,
    link: UserClass,
    methods: &[OutageMethod],
    thresholds_db: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<Vec<OpRow>> {
    if thresholds_db.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("thresholds", "grid must be ascending"));
    }
    let linear: Vec<f64> = thresholds_db.iter().map(|&d| crate::db_to_linear(d)).collect();
    let mut rows = Vec::new();
    for &method in methods {
        let results = match method {
            OutageMethod::MonteCarlo => op_monte_carlo_grid(q, &linear, replicas, seed)?,
            _ => linear
                .iter()
                .map(|&th| evaluate(&q.with_threshold(th), link, method, replicas, seed))
                .collect::<Result<Vec<_>>>()?,
        };
        for (&db, r) in thresholds_db.iter().zip(results) {
            rows.push(OpRow {
                phi_th_db: db,
                method,
                link,
                probability: r.probability,
                std_err: r.std_err,
                replicas: r.replicas,
                seed,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sr() -> Fading {
        Fading::ShadowedRician(ShadowedRicianParams::standard_integer())
    }

    fn query() -> OutageQuery {
        OutageQuery {
            desired: LinkParams { power_w: 1.0, gain: 100.0, fading: sr() },
            ngso_interferers: vec![LinkParams { power_w: 1.0, gain: 2.0, fading: sr() }],
            bs_interferers: vec![LinkParams {
                power_w: 1.0,
                gain: 1.5,
                fading: Fading::Rayleigh(RayleighParams::standard()),
            }],
            noise_w: 1.0,
            threshold: 10.0,
        }
    }

    #[test]
    fn mixed_moments_single_term_is_identity() {
        let t = vec![vec![1.0, 2.0, 5.0]];
        assert_eq!(mixed_moments(&t, 2), vec![1.0, 2.0, 5.0]);
        assert_eq!(mixed_moments(&[], 2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn budget_enforced() {
        let q = query();
        assert!(matches!(op_sr_analytic(&q, 5), Err(Error::CombinatorialLimit { .. })));
    }

    #[test]
    fn rejects_non_integer_m() {
        let mut q = query();
        q.desired.fading = Fading::ShadowedRician(ShadowedRicianParams::standard());
        assert_eq!(op_ngso1_analytic(&q), Err(Error::NonIntegerM(10.1)));
    }

    #[test]
    fn aop_below_op() {
        let q = query();
        let op = op_ngso1_analytic(&q).unwrap();
        let aop = aop_ngso1(&q).unwrap();
        assert!(aop <= op, "aop {aop} op {op}");
        let low = q.with_threshold(0.3);
        let (op, aop) = (op_ngso1_analytic(&low).unwrap(), aop_ngso1(&low).unwrap());
        assert!(aop <= op && aop > 0.75 * op, "aop {aop} op {op}");
    }

    #[test]
    fn bs_rayleigh_snr_limit() {
        let q = OutageQuery {
            desired: LinkParams {
                power_w: 2.0,
                gain: 3.0,
                fading: Fading::Rayleigh(RayleighParams::new(1.5).unwrap()),
            },
            ngso_interferers: vec![],
            bs_interferers: vec![],
            noise_w: 0.7,
            threshold: 4.0,
        };
        let d = 4.0 * 0.7 / 6.0;
        assert!((op_bs_analytic(&q).unwrap() - (1.0 - (-d / 1.5f64).exp())).abs() < 1e-15);
        assert!((aop_bs(&q).unwrap() - d / 1.5).abs() < 1e-15);
    }
}
