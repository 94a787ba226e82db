//! Deep Q-network with experience replay and a periodically refreshed target network.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Activation, Adam, Mlp};

/// One stored interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Hyper-parameters of the Q-learning update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    /// Hidden widths; the first half use ReLU, the second half tanh.
    pub fc_widths: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps between target-network refreshes.
    pub target_refresh: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            fc_widths: vec![64, 64, 128, 128, 256, 256],
            learning_rate: 1e-3,
            gamma: 0.9,
            replay_capacity: 10_000,
            batch_size: 64,
            target_refresh: 200,
        }
    }
}

impl DqnConfig {
    /// Full-size layer widths.
    pub fn full_widths() -> Vec<usize> {
        vec![256, 256, 512, 512, 1024, 1024]
    }

    /// Activations of the hidden layers: rectifiers first, then tanh.
    pub fn hidden_activations(widths: &[usize]) -> Vec<Activation> {
        let half = widths.len().div_ceil(2);
        (0..widths.len())
            .map(|i| if i < half { Activation::Relu } else { Activation::Tanh })
            .collect()
    }
}

/// Online and target Q-networks with their replay buffer.
#[derive(Debug, Clone)]
pub struct QNetwork {
    pub online: Mlp,
    pub target: Mlp,
    pub config: DqnConfig,
    adam: Adam,
    replay: VecDeque<Transition>,
    updates: usize,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, actions: usize, config: DqnConfig, rng: &mut R) -> Self {
        let mut widths = vec![state_dim];
        widths.extend(&config.fc_widths);
        widths.push(actions);
        let online = Mlp::new(&widths, &DqnConfig::hidden_activations(&config.fc_widths), rng);
        Self::from_network(online, config)
    }

    pub fn from_network(online: Mlp, config: DqnConfig) -> Self {
        let adam = Adam::new(online.params.len(), config.learning_rate);
        QNetwork {
            target: online.clone(),
            online,
            adam,
            replay: VecDeque::with_capacity(config.replay_capacity.min(1 << 16)),
            updates: 0,
            config,
        }
    }

    pub fn actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.online.forward(state)
    }

    pub fn greedy(&self, state: &[f64]) -> usize {
        argmax(&self.q_values(state))
    }

    /// ε-greedy choice: one uniform draw `u`; `u > ε` exploits, otherwise a
    /// second draw picks a uniformly random action.
    pub fn select<R: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u > epsilon {
            self.greedy(state)
        } else {
            rng.random_range(0..self.actions())
        }
    }

    pub fn remember(&mut self, t: Transition) {
        if self.replay.len() == self.config.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(t);
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Gradient of the mean squared TD error over `batch` with respect to the
    /// online parameters, and the loss itself.
    pub fn td_gradient(&self, batch: &[&Transition]) -> (Vec<f64>, f64) {
        let mut grad = vec![0.0; self.online.params.len()];
        let mut loss = 0.0;
        let n = batch.len() as f64;
        for t in batch {
            let next = self.target.forward(&t.next_state);
            let y = t.reward + self.config.gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let trace = self.online.trace(&t.state);
            let err = trace.output()[t.action] - y;
            loss += err * err / n;
            let mut g_out = vec![0.0; self.actions()];
            g_out[t.action] = 2.0 * err / n;
            self.online.backward(&trace, &g_out, &mut grad);
        }
        (grad, loss)
    }

    /// One Adam step on a uniformly sampled minibatch. Returns the loss, or
    /// `None` while the buffer holds fewer than `batch_size` transitions.
    pub fn q_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<f64> {
        if self.replay.is_empty() || self.replay.len() < self.config.batch_size {
            return None;
        }
        let batch: Vec<&Transition> = (0..self.config.batch_size)
            .map(|_| &self.replay[rng.random_range(0..self.replay.len())])
            .collect();
        let (grad, loss) = self.td_gradient(&batch);
        self.adam.step(&mut self.online.params, &grad);
        self.updates += 1;
        if self.config.target_refresh > 0 && self.updates % self.config.target_refresh == 0 {
            self.target = self.online.clone();
        }
        Some(loss)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
