//! Discrete power allocation for the NGSO 1, NGSO 2 and BS transmit powers.
//!
//! Each power takes one of `levels` values evenly spaced in `[0, P^max]`.
//! For a given NGSO 1 level the smallest BS and NGSO 2 levels meeting the
//! terrestrial and NGSO 2 SINR targets are found by a monotone fixed-point
//! iteration; the NGSO 1 level itself is searched by an ε-greedy deep
//! Q-network that is rewarded for matching or beating the best NGSO 1 SINR
//! seen so far while staying feasible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dqn::{DqnConfig, QNetwork, Transition};
use crate::channel::rng_stream;
use crate::link::{PowerClass, SinrCoefficients};
use crate::{db_to_linear, Error, Result};

/// Number of features describing an allocation state.
pub const STATE_DIM: usize = 12;

/// The per-slot optimisation problem in coefficient form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProblem {
    pub ngso1: Vec<SinrCoefficients>,
    pub ngso2: Vec<SinrCoefficients>,
    pub bs: Vec<SinrCoefficients>,
    /// Maximum power per [`PowerClass`], W.
    pub p_max: [f64; 3],
    pub levels: usize,
    /// Linear SINR target for the NGSO 2 and BS users.
    pub phi_th: f64,
}

/// Powers and the SINRs they achieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// Grid indices per [`PowerClass`].
    pub levels: [usize; 3],
    /// Powers per [`PowerClass`], W.
    pub powers: [f64; 3],
    /// Mean NGSO 1 SINR, linear.
    pub objective: f64,
    pub sinr_ngso1: Vec<f64>,
    pub sinr_ngso2: Vec<f64>,
    pub sinr_bs: Vec<f64>,
    pub ngso2_ok: bool,
    pub bs_ok: bool,
    /// Sum of rewards collected by the search, zero for fixed allocations.
    pub reward_sum: f64,
}

impl AllocationResult {
    pub fn feasible(&self) -> bool {
        self.ngso2_ok && self.bs_ok
    }

    pub fn p_ngso1(&self) -> f64 {
        self.powers[PowerClass::Ngso1.index()]
    }

    pub fn p_ngso2(&self) -> f64 {
        self.powers[PowerClass::Ngso2.index()]
    }

    pub fn p_bs(&self) -> f64 {
        self.powers[PowerClass::Bs.index()]
    }
}

/// Smallest BS and NGSO 2 levels for a fixed NGSO 1 level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerSolution {
    pub ngso2: usize,
    pub bs: usize,
    pub feasible: bool,
}

impl PowerProblem {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::invalid("levels", "must be at least 2"));
        }
        if self.p_max.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("p_max", "must be finite and >= 0"));
        }
        if !(self.phi_th > 0.0) {
            return Err(Error::invalid("phi_th", "must be positive"));
        }
        Ok(())
    }

    pub fn power(&self, class: PowerClass, level: usize) -> f64 {
        self.p_max[class.index()] * level as f64 / (self.levels - 1) as f64
    }

    pub fn powers(&self, levels: [usize; 3]) -> [f64; 3] {
        [
            self.power(PowerClass::Ngso1, levels[0]),
            self.power(PowerClass::Ngso2, levels[1]),
            self.power(PowerClass::Bs, levels[2]),
        ]
    }

    pub fn objective(&self, p: [f64; 3]) -> f64 {
        if self.ngso1.is_empty() {
            return 0.0;
        }
        self.ngso1.iter().map(|c| c.sinr(p)).sum::<f64>() / self.ngso1.len() as f64
    }

    fn meets(&self, users: &[SinrCoefficients], p: [f64; 3]) -> bool {
        users.iter().all(|c| c.sinr(p) >= self.phi_th)
    }

    pub fn ngso2_ok(&self, p: [f64; 3]) -> bool {
        self.meets(&self.ngso2, p)
    }

    pub fn bs_ok(&self, p: [f64; 3]) -> bool {
        self.meets(&self.bs, p)
    }

    pub fn feasible(&self, p: [f64; 3]) -> bool {
        self.ngso2_ok(p) && self.bs_ok(p)
    }

    /// Smallest ratio SINR/φ over the constrained users (∞ without any).
    pub fn min_slack(&self, p: [f64; 3]) -> f64 {
        self.ngso2
            .iter()
            .chain(&self.bs)
            .map(|c| c.sinr(p) / self.phi_th)
            .fold(f64::INFINITY, f64::min)
    }

    /// Least fixed point of "BS level = smallest meeting the BS target, NGSO 2
    /// level = smallest meeting the NGSO 2 target". Both maps are monotone, so
    /// the iteration from zero is non-decreasing and stops within `2·levels`
    /// rounds; a target that cannot be met pins its level at the maximum.
    pub fn inner(&self, ngso1: usize) -> InnerSolution {
        let top = self.levels - 1;
        let (mut m, mut i) = (0usize, 0usize);
        for _ in 0..2 * self.levels + 2 {
            let new_i = (0..=top)
                .find(|&l| self.bs_ok(self.powers([ngso1, m, l])))
                .unwrap_or(top);
            let new_m = (0..=top)
                .find(|&l| self.ngso2_ok(self.powers([ngso1, l, new_i])))
                .unwrap_or(top);
            let done = new_i == i && new_m == m;
            i = new_i;
            m = new_m;
            if done {
                break;
            }
        }
        InnerSolution {
            ngso2: m,
            bs: i,
            feasible: self.feasible(self.powers([ngso1, m, i])),
        }
    }

    /// SINRs and flags at the given levels.
    pub fn evaluate(&self, levels: [usize; 3], reward_sum: f64) -> AllocationResult {
        let p = self.powers(levels);
        self.evaluate_powers(levels, p, reward_sum)
    }

    pub fn evaluate_powers(&self, levels: [usize; 3], p: [f64; 3], reward_sum: f64) -> AllocationResult {
        AllocationResult {
            levels,
            powers: p,
            objective: self.objective(p),
            sinr_ngso1: self.ngso1.iter().map(|c| c.sinr(p)).collect(),
            sinr_ngso2: self.ngso2.iter().map(|c| c.sinr(p)).collect(),
            sinr_bs: self.bs.iter().map(|c| c.sinr(p)).collect(),
            ngso2_ok: self.ngso2_ok(p),
            bs_ok: self.bs_ok(p),
            reward_sum,
        }
    }

    /// Allocation features: per victim class the summed desired and
    /// cross-class interference coefficients in scaled dB, the noise, the
    /// current NGSO 1 level and the last reward.
    pub fn state(&self, ngso1_level: usize, last_reward: f64) -> Vec<f64> {
        let scaled = |x: f64| (10.0 * x.max(1e-30).log10() + 120.0) / 20.0;
        let sum = |users: &[SinrCoefficients], f: &dyn Fn(&SinrCoefficients) -> f64| users.iter().map(f).sum::<f64>();
        let mut s = Vec::with_capacity(STATE_DIM);
        let groups: [(&[SinrCoefficients], [PowerClass; 2]); 3] = [
            (&self.ngso1, [PowerClass::Ngso2, PowerClass::Bs]),
            (&self.ngso2, [PowerClass::Ngso1, PowerClass::Bs]),
            (&self.bs, [PowerClass::Ngso1, PowerClass::Ngso2]),
        ];
        for (users, cross) in groups {
            s.push(scaled(sum(users, &|c| c.desired)));
            for cl in cross {
                s.push(scaled(sum(users, &|c| c.interference[cl.index()])));
            }
        }
        let noise = self
            .ngso1
            .iter()
            .chain(&self.ngso2)
            .chain(&self.bs)
            .map(|c| c.noise)
            .next()
            .unwrap_or(0.0);
        s.push(scaled(noise));
        s.push(ngso1_level as f64 / (self.levels - 1) as f64);
        s.push(last_reward);
        s
    }
}

/// Settings of the learned allocator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocatorConfig {
    pub levels: usize,
    pub iterations: usize,
    /// Probability of a random action in ε-greedy selection.
    pub epsilon: f64,
    pub reward: f64,
    /// Iterations between Q-network updates while learning.
    pub train_every: usize,
    /// Extra SINR margin demanded on predicted CSI, dB.
    pub constraint_margin_db: f64,
    pub dqn: DqnConfig,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        AllocatorConfig {
            levels: 21,
            iterations: 100,
            epsilon: 0.8,
            reward: 1.0,
            train_every: 4,
            constraint_margin_db: 1.0,
            dqn: DqnConfig::default(),
        }
    }
}

impl AllocatorConfig {
    /// Target SINR actually imposed for threshold `phi_th_db`.
    pub fn target(&self, phi_th_db: f64) -> f64 {
        db_to_linear(phi_th_db + self.constraint_margin_db)
    }
}

/// ε-greedy DQN search over the NGSO 1 power level.
#[derive(Debug, Clone)]
pub struct DqnAllocator {
    pub config: AllocatorConfig,
    pub q: QNetwork,
    rng: ChaCha8Rng,
    last_loss: Option<f64>,
}

impl DqnAllocator {
    pub fn new(config: AllocatorConfig, seed: u64) -> Self {
        let mut init = rng_stream(seed, 0x0051_4e45);
        let q = QNetwork::new(STATE_DIM, config.levels, config.dqn.clone(), &mut init);
        DqnAllocator {
            config,
            q,
            rng: rng_stream(seed, 0x0051_4e46),
            last_loss: None,
        }
    }

    pub fn from_network(config: AllocatorConfig, q: QNetwork, seed: u64) -> Self {
        DqnAllocator {
            config,
            q,
            rng: rng_stream(seed, 0x0051_4e46),
            last_loss: None,
        }
    }

    /// Re-seeds the exploration stream.
    pub fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng.set_stream(stream);
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Runs the search on one problem. With `learn` set, transitions are
    /// stored and the Q-network is updated every `train_every` iterations.
    pub fn allocate(&mut self, problem: &PowerProblem, learn: bool) -> AllocationResult {
        let top = problem.levels - 1;
        let r = self.config.reward;
        let mut best_objective = f64::NEG_INFINITY;
        let mut best: Option<(f64, [usize; 3])> = None;
        let mut fallback: Option<(f64, [usize; 3])> = None;
        let mut reward_sum = 0.0;
        let mut memo: Vec<Option<InnerSolution>> = vec![None; problem.levels];

        let mut visit = |n: usize, best_objective: &mut f64| -> f64 {
            let inner = *memo[n].get_or_insert_with(|| problem.inner(n));
            let levels = [n, inner.ngso2, inner.bs];
            let p = problem.powers(levels);
            if inner.feasible {
                let obj = problem.objective(p);
                let reward = if obj >= *best_objective { r } else { -r };
                if best.is_none_or(|(b, _)| obj > b) {
                    best = Some((obj, levels));
                }
                *best_objective = best_objective.max(obj);
                reward
            } else {
                let slack = problem.min_slack(p);
                if fallback.is_none_or(|(s, _)| slack > s) {
                    fallback = Some((slack, levels));
                }
                -r
            }
        };

        let mut n = top;
        let mut last_reward = visit(n, &mut best_objective);
        reward_sum += last_reward;
        let mut state = problem.state(n, last_reward);
        for it in 0..self.config.iterations {
            let action = self.q.select(&state, self.config.epsilon, &mut self.rng);
            let reward = visit(action, &mut best_objective);
            reward_sum += reward;
            let next_state = problem.state(action, reward);
            if learn {
                self.q.remember(Transition {
                    state: state.clone(),
                    action,
                    reward,
                    next_state: next_state.clone(),
                });
                if self.config.train_every > 0 && it % self.config.train_every == 0 {
                    if let Some(loss) = self.q.q_update(&mut self.rng) {
                        self.last_loss = Some(loss);
                    }
                }
            }
            state = next_state;
            n = action;
            last_reward = reward;
        }
        let _ = (n, last_reward);
        match (best, fallback) {
            (Some((_, levels)), _) => problem.evaluate(levels, reward_sum),
            (None, Some((_, levels))) => problem.evaluate(levels, reward_sum),
            (None, None) => problem.evaluate([0, top, top], reward_sum),
        }
    }
}

/// Learned allocation on the scheduled problem.
pub fn allocate_power(allocator: &mut DqnAllocator, problem: &PowerProblem) -> AllocationResult {
    allocator.allocate(problem, false)
}

/// Learned allocation with fixed beams: the same search on the unscheduled problem.
pub fn baseline_ppafb(allocator: &mut DqnAllocator, unscheduled: &PowerProblem) -> AllocationResult {
    allocator.allocate(unscheduled, false)
}

/// Every transmitter at its configured fixed power.
pub fn baseline_pfpfb(problem: &PowerProblem, fixed: [f64; 3]) -> AllocationResult {
    let top = problem.levels - 1;
    let level = |c: usize| {
        if problem.p_max[c] > 0.0 {
            ((fixed[c] / problem.p_max[c]) * top as f64).round().clamp(0.0, top as f64) as usize
        } else {
            0
        }
    };
    problem.evaluate_powers([level(0), level(1), level(2)], fixed, 0.0)
}

/// Best feasible grid point by exhaustive search, if any.
pub fn exhaustive_optimum(problem: &PowerProblem) -> Option<AllocationResult> {
    let mut best: Option<(f64, [usize; 3])> = None;
    for n in 0..problem.levels {
        for m in 0..problem.levels {
            for i in 0..problem.levels {
                let levels = [n, m, i];
                let p = problem.powers(levels);
                if !problem.feasible(p) {
                    continue;
                }
                let obj = problem.objective(p);
                if best.is_none_or(|(b, _)| obj > b) {
                    best = Some((obj, levels));
                }
            }
        }
    }
    best.map(|(_, levels)| problem.evaluate(levels, 0.0))
}
