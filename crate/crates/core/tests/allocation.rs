//! CSI prediction, Q-learning and the power search against independent
//! oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgin_core::allocation::power::STATE_DIM;
use sgin_core::allocation::*;
use sgin_core::channel::{RayleighParams, ShadowedRicianParams};
use sgin_core::link::{PowerClass, SinrCoefficients};

fn small_predictor() -> PredictorConfig {
    PredictorConfig {
        window: 12,
        context: 48,
        residual_lags: 6,
        lstm_widths: vec![12, 8],
        epochs: 4,
        batch_size: 32,
        max_windows: 768,
        folds: 2,
        learning_rates: vec![1e-2],
        arma_orders: vec![(1, 1), (2, 1)],
        seed: 3,
    }
}

/// One-step MSE of `predict` over the second half of `x`.
fn holdout_mse(x: &[f64], predict: impl Fn(&[f64]) -> f64) -> f64 {
    let start = x.len() / 2;
    let n = (x.len() - start) as f64;
    (start..x.len()).map(|t| (predict(&x[..t]) - x[t]).powi(2)).sum::<f64>() / n
}

fn train_on_first_half(x: &[f64]) -> PredictorModel {
    let h = CsiHistory::new(vec![x[..x.len() / 2].to_vec()]).unwrap();
    train_predictor(&h, &small_predictor()).unwrap()
}

fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

#[test]
fn constant_series_is_predicted_exactly() {
    let x = vec![0.73; 2000];
    let model = train_on_first_half(&x);
    let mse = holdout_mse(&x, |h| predict_csi(&model, h));
    assert!(mse < 1e-10, "mse {mse}");
}

#[test]
fn zero_history_predicts_zero() {
    let model = train_on_first_half(&[0.0; 400]);
    assert_eq!(predict_csi(&model, &[0.0; 64]), 0.0);
    assert_eq!(predict_csi(&model, &[]), 0.0);
}

#[test]
fn short_history_is_an_error_for_the_model() {
    let model = train_on_first_half(&[1.0; 400]);
    let err = model.predict(&[1.0; 3]).unwrap_err();
    assert!(matches!(err, sgin_core::Error::InsufficientHistory { .. }));
    let h = CsiHistory::new(vec![vec![1.0; 5]]).unwrap();
    assert!(train_predictor(&h, &small_predictor()).is_err());
}

#[test]
fn negative_history_is_rejected() {
    assert!(CsiHistory::new(vec![vec![1.0, -0.5, 2.0]]).is_err());
}

#[test]
fn ar2_beats_the_last_value_predictor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (a1, a2) = (0.5, 0.3);
    let mut x = vec![10.0, 10.0];
    for t in 2..10_000 {
        let e: f64 = rng.sample(StandardNormal);
        let v = 10.0 + a1 * (x[t - 1] - 10.0) + a2 * (x[t - 2] - 10.0) + e;
        x.push(v);
    }
    let model = train_on_first_half(&x);
    let combined = holdout_mse(&x, |h| model.predict(h).unwrap());
    let naive = holdout_mse(&x, |h| *h.last().unwrap());
    assert!(combined <= naive, "combined {combined} naive {naive}");
}

#[test]
fn white_noise_cannot_beat_its_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<f64> = (0..6000).map(|_| 10.0 + rng.sample::<f64, _>(StandardNormal)).collect();
    let h = CsiHistory::new(vec![x[..3000].to_vec()]).unwrap();
    // A long normalisation context and a larger training budget keep the
    // estimation error of the mean and of the weights small.
    let cfg = PredictorConfig {
        context: 256,
        max_windows: 2048,
        epochs: 8,
        folds: 2,
        learning_rates: vec![3e-3],
        ..PredictorConfig::default()
    };
    let model = train_predictor(&h, &cfg).unwrap();
    let mse = holdout_mse(&x, |h| model.predict(h).unwrap());
    let var = variance(&x[3000..]);
    assert!((mse - var).abs() / var <= 0.05, "mse {mse} var {var}");
}

#[test]
fn ramp_is_extrapolated() {
    let x: Vec<f64> = (0..1200).map(|t| 1.0 + 0.01 * t as f64).collect();
    let model = train_on_first_half(&x);
    for t in [700, 900, 1199] {
        let p = predict_csi(&model, &x[..t]);
        let want = 2.0 * x[t - 1] - x[t - 2];
        assert!((p - want).abs() / want < 0.1, "t {t}: {p} vs {want}");
    }
}

#[test]
fn fading_prediction_beats_last_value() {
    let synth = CsiSynthesizer {
        correlation: 0.95,
        satellite: ShadowedRicianParams::standard(),
        terrestrial: RayleighParams::standard(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = synth.satellite_series(&mut rng, 8000);
    let model = train_on_first_half(&x);
    let combined = holdout_mse(&x, |h| predict_csi(&model, h));
    let naive = holdout_mse(&x, |h| *h.last().unwrap());
    assert!(combined < naive, "combined {combined} naive {naive}");
}

#[test]
fn predictor_training_is_reproducible() {
    let synth = CsiSynthesizer {
        correlation: 0.9,
        satellite: ShadowedRicianParams::standard(),
        terrestrial: RayleighParams::standard(),
    };
    let x = synth.satellite_series(&mut ChaCha8Rng::seed_from_u64(14), 1500);
    let a = train_on_first_half(&x);
    let b = train_on_first_half(&x);
    assert_eq!(a, b);
}

fn toy_config(lr: f64, gamma: f64) -> DqnConfig {
    DqnConfig {
        fc_widths: vec![8, 8],
        learning_rate: lr,
        gamma,
        replay_capacity: 16,
        batch_size: 1,
        target_refresh: 1,
    }
}

#[test]
fn single_transition_converges_to_bellman_fixed_point() {
    let (r, gamma) = (1.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut q = QNetwork::new(2, 1, toy_config(3e-3, gamma), &mut rng);
    let s = vec![0.3, -0.2];
    q.remember(Transition {
        state: s.clone(),
        action: 0,
        reward: r,
        next_state: s.clone(),
    });
    for _ in 0..20_000 {
        q.q_update(&mut rng);
    }
    let v = q.q_values(&s)[0];
    let fixed = r + gamma * v;
    assert!((v - fixed).abs() < 1e-3, "Q {v} vs r + γ max Q {fixed}");
    assert!((v - r / (1.0 - gamma)).abs() < 1e-3);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut q = QNetwork::new(3, 4, toy_config(0.0, 0.9), &mut rng);
    let before = q.online.params.clone();
    q.remember(Transition {
        state: vec![1.0, 0.0, -1.0],
        action: 2,
        reward: 1.0,
        next_state: vec![0.0, 1.0, 0.0],
    });
    for _ in 0..10 {
        assert!(q.q_update(&mut rng).is_some());
    }
    assert_eq!(q.online.params, before);
}

#[test]
fn td_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut q = QNetwork::new(4, 3, toy_config(1e-3, 0.9), &mut rng);
    let batch: Vec<Transition> = (0..5)
        .map(|i| Transition {
            state: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: i % 3,
            reward: if i % 2 == 0 { 1.0 } else { -1.0 },
            next_state: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let (grad, _) = q.td_gradient(&refs);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 10 {
        let k = rng.random_range(0..q.online.params.len());
        if grad[k].abs() < 1e-6 {
            continue;
        }
        let orig = q.online.params[k];
        q.online.params[k] = orig + h;
        let (_, up) = q.td_gradient(&refs);
        q.online.params[k] = orig - h;
        let (_, down) = q.td_gradient(&refs);
        q.online.params[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        assert!((numeric - grad[k]).abs() / grad[k].abs() <= 1e-4, "param {k}: {numeric} vs {}", grad[k]);
        checked += 1;
    }
}

#[test]
fn epsilon_one_follows_the_random_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let q = QNetwork::new(3, 7, toy_config(1e-3, 0.9), &mut rng);
    let s = [0.1, 0.2, 0.3];
    let mut a = ChaCha8Rng::seed_from_u64(99);
    let mut oracle = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..500 {
        let _: f64 = oracle.random();
        assert_eq!(q.select(&s, 1.0, &mut a), oracle.random_range(0..7usize));
    }
}

#[test]
fn epsilon_zero_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let q = QNetwork::new(3, 7, toy_config(1e-3, 0.9), &mut rng);
    for _ in 0..200 {
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let vals = q.q_values(&s);
        let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let chosen = q.select(&s, 0.0, &mut rng);
        assert_eq!(vals[chosen], best);
    }
}

#[test]
fn q_network_output_matches_action_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let q = QNetwork::new(STATE_DIM, 21, DqnConfig::default(), &mut rng);
    assert_eq!(q.actions(), 21);
    assert_eq!(q.q_values(&[0.0; STATE_DIM]).len(), 21);
}

fn coeffs(class: PowerClass, desired: f64, interference: [f64; 3]) -> SinrCoefficients {
    SinrCoefficients {
        desired_class: class,
        desired,
        interference,
        noise: 1.0,
    }
}

/// One victim per class with random gains relative to unit noise.
fn random_problem(rng: &mut ChaCha8Rng) -> PowerProblem {
    let mut g = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    PowerProblem {
        ngso1: vec![coeffs(PowerClass::Ngso1, g(1.0, 3.0), [0.0, g(-1.0, 2.0), g(-1.0, 2.0)])],
        ngso2: vec![coeffs(PowerClass::Ngso2, g(1.0, 3.0), [g(-1.0, 2.0), 0.0, g(-1.0, 2.0)])],
        bs: vec![coeffs(PowerClass::Bs, g(1.5, 3.0), [g(-1.0, 1.5), g(-1.0, 1.5), 0.0])],
        p_max: [5.0, 5.0, 5.0],
        levels: 21,
        phi_th: g(0.0, 1.0),
    }
}

fn allocator(seed: u64) -> DqnAllocator {
    DqnAllocator::new(AllocatorConfig::default(), seed)
}

#[test]
fn zero_interference_uses_the_top_level() {
    let p = PowerProblem {
        ngso1: vec![coeffs(PowerClass::Ngso1, 100.0, [0.0; 3])],
        ngso2: vec![coeffs(PowerClass::Ngso2, 100.0, [0.0; 3])],
        bs: vec![coeffs(PowerClass::Bs, 100.0, [0.0; 3])],
        p_max: [5.0, 5.0, 5.0],
        levels: 21,
        phi_th: 2.0,
    };
    let a = allocate_power(&mut allocator(0), &p);
    assert_eq!(a.powers[0], 5.0);
    assert!(a.feasible());
    let b = baseline_ppafb(&mut allocator(0), &p);
    assert_eq!(a, b);
}

#[test]
fn small_scene_matches_exhaustive_search() {
    let p = random_problem(&mut ChaCha8Rng::seed_from_u64(0));
    let a = allocate_power(&mut allocator(0), &p);
    let oracle = exhaustive_optimum(&p).expect("seed 0 instance is feasible");
    assert_eq!(a.powers, oracle.powers);
}

#[test]
fn objective_is_near_exhaustive_on_average() {
    let mut ratios = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    while ratios.len() < 20 {
        let p = random_problem(&mut rng);
        if let Some(best) = exhaustive_optimum(&p) {
            let a = allocate_power(&mut allocator(ratios.len() as u64), &p);
            ratios.push(match (a.feasible(), best.objective > 0.0) {
                (false, _) => 0.0,
                (true, true) => a.objective / best.objective,
                (true, false) => 1.0,
            });
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean >= 0.95, "mean ratio {mean}");
}

#[test]
fn fixed_power_baseline_uses_configured_powers() {
    let p = random_problem(&mut ChaCha8Rng::seed_from_u64(32));
    let fixed = [5.0, 2.5, 1.0];
    let r = baseline_pfpfb(&p, fixed);
    assert_eq!(r.powers, fixed);
    assert_eq!(r.sinr_ngso1[0], p.ngso1[0].sinr(fixed));
}

#[test]
fn corner_optimum_makes_the_baselines_agree() {
    let p = PowerProblem {
        ngso1: vec![coeffs(PowerClass::Ngso1, 100.0, [0.0; 3])],
        ngso2: vec![coeffs(PowerClass::Ngso2, 100.0, [0.0; 3])],
        bs: vec![coeffs(PowerClass::Bs, 100.0, [0.0; 3])],
        p_max: [5.0, 5.0, 5.0],
        levels: 21,
        phi_th: 2.0,
    };
    let learned = baseline_ppafb(&mut allocator(1), &p);
    let fixed = baseline_pfpfb(&p, [5.0, 5.0, 5.0]);
    assert_eq!(learned.objective, fixed.objective);
    assert_eq!(learned.sinr_ngso1, fixed.sinr_ngso1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn allocations_respect_box_and_reward_bounds(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut al = allocator(seed);
        let a = allocate_power(&mut al, &p);
        for c in 0..3 {
            prop_assert!(a.powers[c] >= 0.0 && a.powers[c] <= p.p_max[c]);
        }
        let bound = al.config.reward * (al.config.iterations + 1) as f64;
        prop_assert!(a.reward_sum.abs() <= bound);
        // The ε-greedy search reliably reaches a feasible P_n level only
        // when several exist; with one, a 100-step search can miss it.
        let feasible_levels = (0..p.levels).filter(|&n| p.inner(n).feasible).count();
        if feasible_levels >= 5 {
            prop_assert!(a.feasible(), "{feasible_levels} feasible levels");
        }
    }

    #[test]
    fn allocation_is_deterministic(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(allocate_power(&mut allocator(seed), &p), allocate_power(&mut allocator(seed), &p));
    }

    #[test]
    fn learning_keeps_powers_in_range(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut al = DqnAllocator::new(
            AllocatorConfig {
                iterations: 40,
                dqn: DqnConfig { fc_widths: vec![16, 16], batch_size: 8, ..DqnConfig::default() },
                ..AllocatorConfig::default()
            },
            seed,
        );
        for _ in 0..5 {
            let p = random_problem(&mut rng);
            let a = al.allocate(&p, true);
            prop_assert!(a.powers.iter().zip(p.p_max).all(|(x, m)| *x >= 0.0 && *x <= m));
        }
        prop_assert!(al.q.replay_len() > 0);
    }
}
