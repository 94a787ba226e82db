//! ARMA(p, q) residual model fitted by the Hannan–Rissanen two-stage regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `e_t = Σ φ_i e_{t−i} + Σ θ_j ε_{t−j} + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Order of the long autoregression used to estimate innovations.
fn long_order(p: usize, q: usize) -> usize {
    (p + q + 4).max(8)
}

/// Least squares `argmin ‖Xβ − y‖` with the minimum-norm solution for
/// rank-deficient designs.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if k == 0 || rows.is_empty() {
        return vec![0.0; k];
    }
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    match svd.solve(&yv, tol) {
        Ok(b) => b.iter().copied().collect(),
        Err(_) => vec![0.0; k],
    }
}

impl ArmaModel {
    pub fn zero(p: usize, q: usize) -> Self {
        ArmaModel {
            phi: vec![0.0; p],
            theta: vec![0.0; q],
        }
    }

    pub fn order(&self) -> (usize, usize) {
        (self.phi.len(), self.theta.len())
    }

    /// Fits on several independent residual sequences pooled into one regression.
    pub fn fit(series: &[Vec<f64>], p: usize, q: usize) -> Result<Self> {
        let k = long_order(p, q);
        let needed = k + p.max(q) + 2;
        let usable: Vec<&Vec<f64>> = series.iter().filter(|s| s.len() >= needed).collect();
        if usable.is_empty() {
            let got = series.iter().map(|s| s.len()).max().unwrap_or(0);
            return Err(Error::InsufficientHistory { needed, got });
        }
        // Stage 1: long AR for innovation estimates.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for s in &usable {
            for t in k..s.len() {
                rows.push((1..=k).map(|i| s[t - i]).collect::<Vec<_>>());
                y.push(s[t]);
            }
        }
        let ar = least_squares(&rows, &y);
        let innovations: Vec<Vec<f64>> = usable
            .iter()
            .map(|s| {
                (0..s.len())
                    .map(|t| {
                        if t < k {
                            0.0
                        } else {
                            s[t] - (1..=k).map(|i| ar[i - 1] * s[t - i]).sum::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        // Stage 2: regress on lagged values and lagged innovations.
        let start = k + p.max(q);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (s, e) in usable.iter().zip(&innovations) {
            for t in start..s.len() {
                let mut row: Vec<f64> = (1..=p).map(|i| s[t - i]).collect();
                row.extend((1..=q).map(|j| e[t - j]));
                rows.push(row);
                y.push(s[t]);
            }
        }
        let beta = least_squares(&rows, &y);
        let mut model = ArmaModel {
            phi: beta[..p].to_vec(),
            theta: beta[p..].to_vec(),
        };
        // Keep the innovation recursion stable.
        let theta_mass: f64 = model.theta.iter().map(|t| t.abs()).sum();
        if theta_mass >= 0.95 {
            let s = 0.95 / theta_mass;
            model.theta.iter_mut().for_each(|t| *t *= s);
        }
        Ok(model)
    }

    /// One-step forecast of the value following `history`, with innovations
    /// reconstructed from zero initial conditions.
    pub fn forecast(&self, history: &[f64]) -> f64 {
        let (p, q) = self.order();
        let mut eps = vec![0.0; history.len()];
        let predict = |t: usize, eps: &[f64]| -> f64 {
            let ar: f64 = (1..=p).filter(|&i| i <= t).map(|i| self.phi[i - 1] * history[t - i]).sum();
            let ma: f64 = (1..=q).filter(|&j| j <= t).map(|j| self.theta[j - 1] * eps[t - j]).sum();
            ar + ma
        };
        for t in 0..history.len() {
            eps[t] = history[t] - predict(t, &eps);
        }
        let n = history.len();
        let ar: f64 = (1..=p).filter(|&i| i <= n).map(|i| self.phi[i - 1] * history[n - i]).sum();
        let ma: f64 = (1..=q).filter(|&j| j <= n).map(|j| self.theta[j - 1] * eps[n - j]).sum();
        ar + ma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rng_stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn recovers_ar1() {
        let mut rng = rng_stream(9, 0);
        let mut s = vec![0.0f64];
        for _ in 0..20_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            s.push(0.6 * s.last().unwrap() + e);
        }
        let m = ArmaModel::fit(&[s], 1, 1).unwrap();
        assert!((m.phi[0] - 0.6).abs() < 0.05, "{m:?}");
        assert!(m.theta[0].abs() < 0.05, "{m:?}");
    }

    #[test]
    fn recovers_ma1() {
        let mut rng = rng_stream(10, 0);
        let e: Vec<f64> = (0..20_001).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s: Vec<f64> = (1..e.len()).map(|t| e[t] + 0.5 * e[t - 1]).collect();
        let m = ArmaModel::fit(&[s], 1, 1).unwrap();
        assert!(m.phi[0].abs() < 0.07, "{m:?}");
        assert!((m.theta[0] - 0.5).abs() < 0.07, "{m:?}");
    }

    #[test]
    fn constant_zero_series_forecasts_zero() {
        let m = ArmaModel::fit(&[vec![0.0; 64]], 2, 2).unwrap();
        assert_eq!(m.forecast(&[0.0; 10]), 0.0);
    }
}
