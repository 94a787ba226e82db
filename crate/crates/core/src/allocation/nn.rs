//! Fully connected networks with hand-written backpropagation and the Adam optimizer.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Element-wise nonlinearity of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Shape of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Offset of the row-major `outputs × inputs` weight block; biases follow.
    pub offset: usize,
}

impl LayerShape {
    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }
}

/// Multilayer perceptron whose parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<LayerShape>,
    pub params: Vec<f64>,
}

/// Layer outputs kept for the backward pass; entry 0 is the input.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has the input at least")
    }
}

impl Mlp {
    /// Network with layer `widths` (input first, output last). Hidden layers
    /// use `hidden[i]`; the output layer is linear. Weights are He/Xavier
    /// initialised, biases zero.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden: &[Activation], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        assert_eq!(hidden.len(), widths.len() - 2, "one activation per hidden layer");
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for i in 0..widths.len() - 1 {
            let activation = hidden.get(i).copied().unwrap_or(Activation::Linear);
            let shape = LayerShape {
                inputs: widths[i],
                outputs: widths[i + 1],
                activation,
                offset,
            };
            offset += shape.len();
            layers.push(shape);
        }
        let mut params = vec![0.0; offset];
        for l in &layers {
            let fan = match l.activation {
                Activation::Relu => 2.0 / l.inputs as f64,
                _ => 1.0 / l.inputs as f64,
            };
            let normal = Normal::new(0.0, fan.sqrt()).expect("finite std");
            for w in &mut params[l.offset..l.bias_offset()] {
                *w = normal.sample(rng);
            }
        }
        Mlp { layers, params }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.outputs));
        w
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).activations.pop().unwrap_or_default()
    }

    pub fn trace(&self, x: &[f64]) -> MlpTrace {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for l in &self.layers {
            let input = activations.last().expect("non-empty");
            let w = &self.params[l.offset..l.bias_offset()];
            let b = &self.params[l.bias_offset()..l.offset + l.len()];
            let out: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    let row = &w[o * l.inputs..(o + 1) * l.inputs];
                    let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    l.activation.apply(z)
                })
                .collect();
            activations.push(out);
        }
        MlpTrace { activations }
    }

    /// Adds `∂L/∂θ` to `grad` given `∂L/∂output`.
    pub fn backward(&self, trace: &MlpTrace, grad_output: &[f64], grad: &mut [f64]) {
        let mut delta: Vec<f64> = grad_output.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let out = &trace.activations[li + 1];
            let input = &trace.activations[li];
            for o in 0..l.outputs {
                delta[o] *= l.activation.derivative(out[o]);
            }
            let w = &self.params[l.offset..l.bias_offset()];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[l.offset + o * l.inputs..l.offset + (o + 1) * l.inputs];
                for (g, x) in gw.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[l.bias_offset() + o] += d;
            }
            if li > 0 {
                let mut next = vec![0.0; l.inputs];
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * l.inputs..(o + 1) * l.inputs];
                    for (n, wv) in next.iter_mut().zip(row) {
                        *n += d * wv;
                    }
                }
                delta = next;
            }
        }
    }
}

/// Adam optimizer state for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rng_stream;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_stream(3, 0);
        let net = Mlp::new(&[4, 6, 5, 3], &[Activation::Tanh, Activation::Tanh], &mut rng);
        let x = [0.3, -0.7, 1.1, 0.05];
        let loss = |n: &Mlp| n.forward(&x).iter().enumerate().map(|(i, y)| (i as f64 + 1.0) * y).sum::<f64>();
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&net.trace(&x), &[1.0, 2.0, 3.0], &mut grad);
        for i in (0..net.params.len()).step_by(7) {
            let h = 1e-6;
            let mut p = net.clone();
            p.params[i] += h;
            let mut q = net.clone();
            q.params[i] -= h;
            let fd = (loss(&p) - loss(&q)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
