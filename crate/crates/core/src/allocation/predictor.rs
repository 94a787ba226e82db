//! One-step CSI prediction: an LSTM regressor corrected by an ARMA model of
//! its own residuals.
//!
//! Each prediction normalises the trailing `context` samples of a link by
//! their mean and standard deviation. The LSTM sees the last `window` samples
//! as (level, increment) pairs and predicts the next increment; the ARMA model
//! forecasts the LSTM's next normalised error from its errors on the previous
//! `residual_lags` steps. Hyper-parameters are chosen by K-fold
//! cross-validation over contiguous time blocks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::arma::ArmaModel;
use super::lstm::Lstm;
use super::nn::Adam;
use crate::channel::rng_stream;
use crate::{Error, Result};

/// Per-link `|h|²` series, slot-indexed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CsiHistory {
    pub series: Vec<Vec<f64>>,
}

impl CsiHistory {
    pub fn new(series: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in series.iter().enumerate() {
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(format!("series[{i}]"), "values must be finite and >= 0"));
            }
        }
        Ok(CsiHistory { series })
    }
}

/// Predictor hyper-parameters and search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub window: usize,
    pub context: usize,
    pub residual_lags: usize,
    pub lstm_widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Cap on training windows per fit; windows are subsampled evenly beyond it.
    pub max_windows: usize,
    pub folds: usize,
    pub learning_rates: Vec<f64>,
    pub arma_orders: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            window: 16,
            context: 64,
            residual_lags: 8,
            lstm_widths: vec![32, 16],
            epochs: 6,
            batch_size: 32,
            max_windows: 1024,
            folds: 5,
            learning_rates: vec![1e-2, 1e-3],
            arma_orders: vec![(1, 1), (1, 2), (2, 1), (2, 2)],
            seed: 0,
        }
    }
}

impl PredictorConfig {
    /// Full-size layer widths.
    pub fn full_widths() -> Vec<usize> {
        vec![128, 64]
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid("window", "must be at least 2"));
        }
        if self.context < self.window {
            return Err(Error::invalid("context", "must be at least window"));
        }
        if self.lstm_widths.is_empty() || self.lstm_widths.contains(&0) {
            return Err(Error::invalid("lstm_widths", "widths must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("folds", "must be at least 2"));
        }
        if self.learning_rates.is_empty() || self.arma_orders.is_empty() {
            return Err(Error::invalid("grid", "learning_rates and arma_orders must be non-empty"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }

    /// Shortest series usable for training.
    pub fn min_series_len(&self) -> usize {
        self.window + self.residual_lags + 2
    }
}

/// Provenance of a trained predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub folds: usize,
    pub learning_rate: f64,
    pub cv_mse: f64,
}

/// Trained LSTM-ARMA predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub window: usize,
    pub context: usize,
    pub residual_lags: usize,
    pub lstm: Lstm,
    pub arma: ArmaModel,
    pub meta: TrainingMeta,
}

/// Normalised LSTM input for the prefix ending at the last element of `x`.
struct Features {
    seq: Vec<f64>,
    last: f64,
    scale: f64,
}

fn features(x: &[f64], window: usize, context: usize) -> Option<Features> {
    let n = x.len();
    if n < window {
        return None;
    }
    let ctx = &x[n - context.min(n)..];
    let mean = ctx.iter().sum::<f64>() / ctx.len() as f64;
    let var = ctx.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ctx.len() as f64;
    let peak = ctx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = var.sqrt().max(1e-9 * peak);
    if scale <= 0.0 || !scale.is_finite() {
        return None;
    }
    let w = &x[n - window..];
    let mut seq = Vec::with_capacity(2 * window);
    for t in 0..window {
        let prev = if t == 0 {
            if n > window {
                x[n - window - 1]
            } else {
                w[0]
            }
        } else {
            w[t - 1]
        };
        seq.push((w[t] - mean) / scale);
        seq.push((w[t] - prev) / scale);
    }
    Some(Features {
        seq,
        last: w[window - 1],
        scale,
    })
}

fn lstm_predict(lstm: &Lstm, x: &[f64], window: usize, context: usize) -> (f64, f64) {
    match features(x, window, context) {
        Some(f) => (f.last + f.scale * lstm.forward(&f.seq), f.scale),
        None => (x.last().copied().unwrap_or(0.0), 0.0),
    }
}

/// Normalised LSTM errors for predicting `x[t]` from `x[..t]`, for `t` in `range`.
fn residuals(lstm: &Lstm, x: &[f64], range: std::ops::Range<usize>, window: usize, context: usize) -> Vec<f64> {
    range
        .map(|t| {
            let (pred, scale) = lstm_predict(lstm, &x[..t], window, context);
            if scale > 0.0 {
                (x[t] - pred) / scale
            } else {
                0.0
            }
        })
        .collect()
}

impl PredictorModel {
    /// Unclamped one-step prediction from a history of at least `window` samples.
    pub fn predict(&self, history: &[f64]) -> Result<f64> {
        let n = history.len();
        if n < self.window {
            return Err(Error::InsufficientHistory {
                needed: self.window,
                got: n,
            });
        }
        let (base, scale) = lstm_predict(&self.lstm, history, self.window, self.context);
        if scale == 0.0 {
            return Ok(base);
        }
        let lags = self.residual_lags.min(n - self.window);
        let res = residuals(&self.lstm, history, n - lags..n, self.window, self.context);
        Ok(base + scale * self.arma.forecast(&res))
    }

    /// LSTM part alone.
    pub fn predict_lstm(&self, history: &[f64]) -> f64 {
        lstm_predict(&self.lstm, history, self.window, self.context).0
    }

    /// Minimum history for a prediction.
    pub fn min_history(&self) -> usize {
        self.window
    }
}

/// Next-slot `|h|²`, clamped at zero. Histories shorter than the model window
/// fall back to the last value (or zero when empty).
pub fn predict_csi(model: &PredictorModel, history: &[f64]) -> f64 {
    model
        .predict(history)
        .unwrap_or_else(|_| history.last().copied().unwrap_or(0.0))
        .max(0.0)
}

/// Training examples: (series index, target index).
fn windows(series: &[Vec<f64>], ranges: &[(usize, std::ops::Range<usize>)], window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (s, r) in ranges {
        let lo = r.start.max(window);
        for t in lo..r.end.min(series[*s].len()) {
            out.push((*s, t));
        }
    }
    out
}

fn subsample(mut v: Vec<(usize, usize)>, cap: usize) -> Vec<(usize, usize)> {
    if v.len() > cap && cap > 0 {
        let step = v.len() as f64 / cap as f64;
        v = (0..cap).map(|i| v[(i as f64 * step) as usize]).collect();
    }
    v
}

fn train_lstm(series: &[Vec<f64>], examples: &[(usize, usize)], cfg: &PredictorConfig, lr: f64, seed: u64) -> Lstm {
    let mut rng = rng_stream(seed, 0x4c53_544d);
    let mut lstm = Lstm::new(2, &cfg.lstm_widths, &mut rng);
    let prepared: Vec<(Vec<f64>, f64)> = examples
        .iter()
        .filter_map(|&(s, t)| {
            let x = &series[s];
            features(&x[..t], cfg.window, cfg.context).map(|f| {
                let target = (x[t] - f.last) / f.scale;
                (f.seq, target)
            })
        })
        .collect();
    if prepared.is_empty() {
        return lstm;
    }
    let mut adam = Adam::new(lstm.param_count(), lr);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut grad = vec![0.0; lstm.param_count()];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let n = chunk.len() as f64;
            for &i in chunk {
                let (seq, target) = &prepared[i];
                let y = lstm.forward(seq);
                let dy = 2.0 * (y - target) / n;
                lstm.backward(seq, dy, &mut grad);
            }
            adam.step(&mut lstm.params, &grad);
        }
    }
    lstm
}

/// Residual sequences over contiguous training segments.
fn residual_segments(lstm: &Lstm, series: &[Vec<f64>], ranges: &[(usize, std::ops::Range<usize>)], cfg: &PredictorConfig) -> Vec<Vec<f64>> {
    ranges
        .iter()
        .filter(|(_, r)| r.end > r.start.max(cfg.window))
        .map(|(s, r)| residuals(lstm, &series[*s], r.start.max(cfg.window)..r.end, cfg.window, cfg.context))
        .collect()
}

/// Trains the LSTM-ARMA predictor with K-fold cross-validated hyper-parameters.
pub fn train_predictor(history: &CsiHistory, cfg: &PredictorConfig) -> Result<PredictorModel> {
    cfg.validate()?;
    let series: Vec<Vec<f64>> = history
        .series
        .iter()
        .filter(|s| s.len() >= cfg.min_series_len() + cfg.folds)
        .cloned()
        .collect();
    if series.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: cfg.min_series_len() + cfg.folds,
            got: history.series.iter().map(|s| s.len()).max().unwrap_or(0),
        });
    }
    let k = cfg.folds;
    let mut scores: Vec<(f64, usize, usize)> = Vec::new();
    for (li, &lr) in cfg.learning_rates.iter().enumerate() {
        let mut sse = vec![0.0; cfg.arma_orders.len()];
        let mut count = 0usize;
        for fold in 0..k {
            let mut train_ranges = Vec::new();
            let mut test_ranges = Vec::new();
            for (s, x) in series.iter().enumerate() {
                let n = x.len();
                let (a, b) = (fold * n / k, (fold + 1) * n / k);
                test_ranges.push((s, a..b));
                train_ranges.push((s, 0..a));
                // Training windows must not read held-out samples.
                train_ranges.push((s, (b + cfg.context).min(n)..n));
            }
            let train = subsample(windows(&series, &train_ranges, cfg.window), cfg.max_windows);
            let lstm = train_lstm(&series, &train, cfg, lr, cfg.seed ^ ((fold as u64) << 8));
            let segments = residual_segments(&lstm, &series, &train_ranges, cfg);
            let test = subsample(windows(&series, &test_ranges, cfg.window), cfg.max_windows / 2);
            for (oi, &(p, q)) in cfg.arma_orders.iter().enumerate() {
                let arma = ArmaModel::fit(&segments, p, q).unwrap_or_else(|_| ArmaModel::zero(p, q));
                let model = PredictorModel {
                    window: cfg.window,
                    context: cfg.context,
                    residual_lags: cfg.residual_lags,
                    lstm: lstm.clone(),
                    arma,
                    meta: TrainingMeta {
                        seed: cfg.seed,
                        epochs: cfg.epochs,
                        folds: k,
                        learning_rate: lr,
                        cv_mse: f64::NAN,
                    },
                };
                for &(s, t) in &test {
                    let pred = model.predict(&series[s][..t]).unwrap_or(series[s][t - 1]);
                    let e = pred - series[s][t];
                    sse[oi] += e * e;
                }
            }
            count += test.len();
        }
        for (oi, e) in sse.iter().enumerate() {
            scores.push((e / count.max(1) as f64, li, oi));
        }
    }
    let (cv_mse, li, oi) = scores
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty grid");
    let lr = cfg.learning_rates[li];
    let (p, q) = cfg.arma_orders[oi];
    log::debug!("predictor cross-validation picked lr={lr} arma=({p},{q}) mse={cv_mse:.3e}");
    let all: Vec<(usize, std::ops::Range<usize>)> = series.iter().enumerate().map(|(s, x)| (s, 0..x.len())).collect();
    let train = subsample(windows(&series, &all, cfg.window), cfg.max_windows);
    let lstm = train_lstm(&series, &train, cfg, lr, cfg.seed);
    let segments = residual_segments(&lstm, &series, &all, cfg);
    let arma = ArmaModel::fit(&segments, p, q).unwrap_or_else(|_| ArmaModel::zero(p, q));
    Ok(PredictorModel {
        window: cfg.window,
        context: cfg.context,
        residual_lags: cfg.residual_lags,
        lstm,
        arma,
        meta: TrainingMeta {
            seed: cfg.seed,
            epochs: cfg.epochs,
            folds: k,
            learning_rate: lr,
            cv_mse,
        },
    })
}
