//! Stacked LSTM regressor with a linear skip from the last input.
//!
//! The network maps an input sequence to one scalar read from the final time
//! step: `y = w·h_top(T) + s·x(T)`. Candidate gates carry no bias and the
//! head has none either, so an all-zero input sequence yields exactly zero.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Layer sizes and flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LayerIndex {
    n_in: usize,
    n_h: usize,
    w: usize,
    b: usize,
}

impl LayerIndex {
    fn cols(&self) -> usize {
        self.n_in + self.n_h
    }
}

#[derive(Debug, Clone, Default)]
struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut net = Lstm {
            inputs,
            hidden: hidden.to_vec(),
            params: Vec::new(),
        };
        let n = net.param_count();
        net.params = vec![0.0; n];
        for l in net.layout() {
            let normal = Normal::new(0.0, (1.0 / l.cols() as f64).sqrt()).expect("finite std");
            for p in &mut net.params[l.w..l.w + 4 * l.n_h * l.cols()] {
                *p = normal.sample(rng);
            }
            for p in &mut net.params[l.b + l.n_h..l.b + 2 * l.n_h] {
                *p = 1.0;
            }
        }
        let top = *hidden.last().expect("at least one layer");
        let normal = Normal::new(0.0, (1.0 / top as f64).sqrt()).expect("finite std");
        let head = net.head_offset();
        for p in &mut net.params[head..head + top] {
            *p = 0.1 * normal.sample(rng);
        }
        net
    }

    fn layout(&self) -> Vec<LayerIndex> {
        let mut out = Vec::with_capacity(self.hidden.len());
        let mut offset = 0;
        let mut n_in = self.inputs;
        for &n_h in &self.hidden {
            let w = offset;
            let b = w + 4 * n_h * (n_in + n_h);
            out.push(LayerIndex { n_in, n_h, w, b });
            offset = b + 4 * n_h;
            n_in = n_h;
        }
        out
    }

    fn head_offset(&self) -> usize {
        self.layout().last().map(|l| l.b + 4 * l.n_h).unwrap_or(0)
    }

    /// Offset of the linear skip weights.
    pub fn skip_offset(&self) -> usize {
        self.head_offset() + self.hidden.last().copied().unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.skip_offset() + self.inputs
    }

    fn run(&self, seq: &[f64]) -> (f64, Vec<Vec<StepCache>>) {
        let steps = seq.len() / self.inputs;
        let layout = self.layout();
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(layout.len());
        let mut layer_input: Vec<Vec<f64>> = (0..steps)
            .map(|t| seq[t * self.inputs..(t + 1) * self.inputs].to_vec())
            .collect();
        for l in &layout {
            let (n_h, cols) = (l.n_h, l.cols());
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + 4 * n_h];
            let mut h = vec![0.0; n_h];
            let mut c = vec![0.0; n_h];
            let mut cache = Vec::with_capacity(steps);
            let mut outputs = Vec::with_capacity(steps);
            for x in &layer_input {
                let mut z = vec![0.0; 4 * n_h];
                for (r, zr) in z.iter_mut().enumerate() {
                    let row = &w[r * cols..(r + 1) * cols];
                    let mut acc = if (2 * n_h..3 * n_h).contains(&r) { 0.0 } else { b[r] };
                    for k in 0..l.n_in {
                        acc += row[k] * x[k];
                    }
                    for k in 0..n_h {
                        acc += row[l.n_in + k] * h[k];
                    }
                    *zr = acc;
                }
                let mut gates = vec![0.0; 4 * n_h];
                for k in 0..n_h {
                    gates[k] = sigmoid(z[k]);
                    gates[n_h + k] = sigmoid(z[n_h + k]);
                    gates[2 * n_h + k] = z[2 * n_h + k].tanh();
                    gates[3 * n_h + k] = sigmoid(z[3 * n_h + k]);
                }
                let c_prev = c.clone();
                let h_prev = h.clone();
                let mut tanh_c = vec![0.0; n_h];
                for k in 0..n_h {
                    c[k] = gates[n_h + k] * c_prev[k] + gates[k] * gates[2 * n_h + k];
                    tanh_c[k] = c[k].tanh();
                    h[k] = gates[3 * n_h + k] * tanh_c[k];
                }
                outputs.push(h.clone());
                cache.push(StepCache {
                    input: x.clone(),
                    h_prev,
                    c_prev,
                    gates,
                    tanh_c,
                    h: h.clone(),
                });
            }
            caches.push(cache);
            layer_input = outputs;
        }
        let top = caches.last().and_then(|c| c.last());
        let head = self.head_offset();
        let skip = self.skip_offset();
        let mut y = 0.0;
        if let Some(last) = top {
            y += last.h.iter().zip(&self.params[head..skip]).map(|(a, b)| a * b).sum::<f64>();
        }
        if steps > 0 {
            let x_last = &seq[(steps - 1) * self.inputs..steps * self.inputs];
            y += x_last.iter().zip(&self.params[skip..]).map(|(a, b)| a * b).sum::<f64>();
        }
        (y, caches)
    }

    /// Output for a row-major `steps × inputs` sequence.
    pub fn forward(&self, seq: &[f64]) -> f64 {
        self.run(seq).0
    }

    /// Adds `dy · ∂y/∂θ` to `grad`; returns `y`.
    pub fn backward(&self, seq: &[f64], dy: f64, grad: &mut [f64]) -> f64 {
        let (y, caches) = self.run(seq);
        let steps = seq.len() / self.inputs;
        if steps == 0 {
            return y;
        }
        let layout = self.layout();
        let head = self.head_offset();
        let skip = self.skip_offset();
        let top = caches.last().expect("layers").last().expect("steps");
        for (k, h) in top.h.iter().enumerate() {
            grad[head + k] += dy * h;
        }
        let x_last = &seq[(steps - 1) * self.inputs..steps * self.inputs];
        for (k, x) in x_last.iter().enumerate() {
            grad[skip + k] += dy * x;
        }
        let n_top = top.h.len();
        // Gradient arriving at each layer's outputs from above, per step.
        let mut from_above: Vec<Vec<f64>> = vec![vec![0.0; n_top]; steps];
        from_above[steps - 1] = self.params[head..head + n_top].iter().map(|w| dy * w).collect();
        for (li, l) in layout.iter().enumerate().rev() {
            let (n_h, cols) = (l.n_h, l.cols());
            let cache = &caches[li];
            let mut dh_rec = vec![0.0; n_h];
            let mut dc_next = vec![0.0; n_h];
            let mut below = vec![vec![0.0; l.n_in]; steps];
            for t in (0..steps).rev() {
                let s = &cache[t];
                let mut dz = vec![0.0; 4 * n_h];
                for k in 0..n_h {
                    let (i, f, g, o) = (s.gates[k], s.gates[n_h + k], s.gates[2 * n_h + k], s.gates[3 * n_h + k]);
                    let dh = from_above[t][k] + dh_rec[k];
                    let d_o = dh * s.tanh_c[k];
                    let dc = dh * o * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[n_h + k] = dc * s.c_prev[k] * f * (1.0 - f);
                    dz[2 * n_h + k] = dc * i * (1.0 - g * g);
                    dz[3 * n_h + k] = d_o * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let mut dh_prev = vec![0.0; n_h];
                for (r, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = l.w + r * cols;
                    for k in 0..l.n_in {
                        grad[row + k] += d * s.input[k];
                        below[t][k] += d * self.params[row + k];
                    }
                    for k in 0..n_h {
                        grad[row + l.n_in + k] += d * s.h_prev[k];
                        dh_prev[k] += d * self.params[row + l.n_in + k];
                    }
                    if !(2 * n_h..3 * n_h).contains(&r) {
                        grad[l.b + r] += d;
                    }
                }
                dh_rec = dh_prev;
            }
            from_above = below;
        }
        y
    }
}
