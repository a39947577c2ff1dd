//! Independent oracles for the computed examples of each module.

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, Array4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use ordc_core::agents::{
    backtest, q_learn, EpisodeSlice, ModelEnv, QLearningConfig, TabularEnv, TabularStep, TwapPolicy,
};
use ordc_core::data::{generate_synthetic_day, SyntheticDayConfig};
use ordc_core::env::{run_episode, trading_cost, EpisodeConfig};
use ordc_core::features::{fit_linear_encoder, NUM_FUTURE_STATS};
use ordc_core::rng::{stream, SimRng};
use ordc_core::theory::{
    estimate_from_counts, evaluate_policy, illustrative_estimators, l1_factorization_check, random_model,
    random_stochastic, sample_latent_counts, value_iteration, OrdcModel, Policy,
};
use ordc_core::toy::{
    generate_paths, train_aggregated_agent, train_memorizing_baseline, toy_reward, Allocation, BrownianConfig,
    CemConfig, PriceAnchor, ToyAgent, ToyDataset, EXEC_LEN,
};

fn random_matrix(rows: usize, cols: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

#[test]
fn encoder_recovers_generating_weights() {
    let mut rng = stream(1, "enc", 0);
    let d = 5;
    let w0 = random_matrix(d, NUM_FUTURE_STATS, &mut rng);
    let x = random_matrix(40, d, &mut rng);
    let y: Vec<[f64; 8]> = x
        .iter()
        .map(|r| {
            let mut t = [0.0; 8];
            for (j, v) in t.iter_mut().enumerate() {
                *v = (0..d).map(|i| w0[i][j] * r[i]).sum();
            }
            t
        })
        .collect();
    let enc = fit_linear_encoder(&x, &y, 0.0).unwrap();
    for i in 0..d {
        for j in 0..NUM_FUTURE_STATS {
            assert_abs_diff_eq!(enc.weight(i, j), w0[i][j], epsilon = 1e-8);
        }
    }
}

#[test]
fn huge_ridge_shrinks_to_zero() {
    let mut rng = stream(2, "enc", 0);
    let x = random_matrix(30, 4, &mut rng);
    let y: Vec<[f64; 8]> = (0..30).map(|i| [i as f64; 8]).collect();
    let enc = fit_linear_encoder(&x, &y, 1e12).unwrap();
    assert!(enc.weights.iter().all(|w| w.abs() <= 1e-6));
}

#[test]
fn single_sample_closed_form() {
    let x = vec![1.5, -2.0, 0.5];
    let y = [1.0, -1.0, 2.0, 0.0, 0.5, 3.0, -2.5, 4.0];
    let lambda = 0.7;
    let enc = fit_linear_encoder(std::slice::from_ref(&x), &[y], lambda).unwrap();
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    // direct solve of (x x^T + lambda I) w = x y_j
    let gram = DMatrix::from_fn(3, 3, |i, j| x[i] * x[j] + if i == j { lambda } else { 0.0 });
    for j in 0..8 {
        let rhs = DVector::from_iterator(3, x.iter().map(|v| v * y[j]));
        let direct = gram.clone().lu().solve(&rhs).unwrap();
        for i in 0..3 {
            let closed = x[i] * y[j] / (norm2 + lambda);
            assert_abs_diff_eq!(enc.weight(i, j), closed, epsilon = 1e-12);
            assert_abs_diff_eq!(enc.weight(i, j), direct[i], epsilon = 1e-12);
        }
    }
}

#[test]
fn value_iteration_solves_policy_linear_system() {
    let mut rng = stream(3, "vi", 0);
    // five joint states as five latents with a single controlled state
    let nx = 5;
    let na = 2;
    let px = random_stochastic(nx, &mut rng);
    let r = Array3::from_shape_fn((nx, 1, na), |_| rng.random::<f64>());
    let model = OrdcModel::new(px, Array4::ones((nx, 1, na, 1)), r, 0.9).unwrap();
    let q = value_iteration(&model, 1e-13, 100_000).unwrap();
    let Policy::Deterministic(pi) = q.greedy_policy() else { unreachable!() };
    // (I - gamma P^pi) Q^pi = r for the state-action pairs chosen by pi
    let p_pi = DMatrix::from_fn(nx, nx, |i, j| model.px[[i, j]]);
    let a = DMatrix::identity(nx, nx) - p_pi * model.gamma;
    let mut rhs = DVector::zeros(nx);
    for x in 0..nx {
        rhs[x] = model.r[[x, 0, pi[x]]];
    }
    let v = a.lu().solve(&rhs).unwrap();
    for x in 0..nx {
        for act in 0..na {
            let exact = model.r[[x, 0, act]] + model.gamma * (0..nx).map(|y| model.px[[x, y]] * v[y]).sum::<f64>();
            assert_abs_diff_eq!(q.q[[x, 0, act]], exact, epsilon = 1e-8);
        }
    }
}

#[test]
fn l1_identity_on_4_3_2() {
    let mut rng = stream(4, "l1", 0);
    let m = random_model(4, 3, 2, 0.9, &mut rng).unwrap();
    let px_hat = random_stochastic(4, &mut rng);
    let rows = l1_factorization_check(&m.px, &px_hat, &m.ps).unwrap();
    assert_eq!(rows.len(), 24);
    for r in rows {
        let mut joint = 0.0;
        for y in 0..4 {
            for s2 in 0..3 {
                let p = m.px[[r.x, y]] * m.ps[[r.x, r.s, r.a, s2]];
                let q = px_hat[[r.x, y]] * m.ps[[r.x, r.s, r.a, s2]];
                joint += (p - q).abs();
            }
        }
        assert_abs_diff_eq!(joint, r.joint, epsilon = 1e-12);
        assert_abs_diff_eq!(r.joint, r.latent, epsilon = 1e-12);
    }
}

#[test]
fn single_latent_distances_vanish() {
    let mut rng = stream(5, "l1", 0);
    let m = random_model(1, 3, 2, 0.9, &mut rng).unwrap();
    for r in l1_factorization_check(&m.px, &m.px.clone(), &m.ps).unwrap() {
        assert_eq!((r.joint, r.latent), (0.0, 0.0));
    }
}

#[test]
fn estimation_error_decreases_with_samples() {
    let mut rng = stream(6, "est", 0);
    let px = random_stochastic(5, &mut rng);
    let mut means = Vec::new();
    for n in [100u64, 1_000, 10_000] {
        let mut total = 0.0;
        for t in 0..50 {
            let mut r = stream(6, "est-trial", n * 100 + t);
            let hat = estimate_from_counts(&sample_latent_counts(&px, n, &mut r)).unwrap();
            total += (0..5).map(|y| (px[[0, y]] - hat[[0, y]]).abs()).sum::<f64>();
        }
        means.push(total / 50.0);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    // roughly sqrt(N) scaling
    assert!((means[0] / means[2] - 10.0).abs() < 3.0, "{means:?}");
}

#[test]
fn deterministic_model_estimators_have_no_variance() {
    let px = Array2::from_shape_fn((3, 3), |(i, j)| if j == (i + 1) % 3 { 1.0 } else { 0.0 });
    let r = Array3::from_shape_fn((3, 1, 1), |(i, _, _)| i as f64 / 2.0);
    let m = OrdcModel::new(px, Array4::ones((3, 1, 1, 1)), r, 0.8).unwrap();
    let rep = illustrative_estimators(&m, &Policy::Uniform, (0, 0, 0), 5, 100, 30, 1).unwrap();
    assert!(rep.single.variance <= 1e-24);
    assert!(rep.pooled.variance <= 1e-24);
}

#[test]
fn policy_evaluation_bound_chain() {
    let mut rng = stream(7, "chain", 0);
    for _ in 0..20 {
        let m = random_model(4, 3, 2, 0.8, &mut rng).unwrap();
        let hat = m.with_px(random_stochastic(4, &mut rng)).unwrap();
        let q = evaluate_policy(&m, &Policy::Uniform, 1e-12, 100_000).unwrap();
        let qh = evaluate_policy(&hat, &Policy::Uniform, 1e-12, 100_000).unwrap();
        let max_l1 = (0..4)
            .map(|x| (0..4).map(|y| (m.px[[x, y]] - hat.px[[x, y]]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let bound = m.gamma / (1.0 - m.gamma).powi(2) * max_l1;
        assert!(q.sup_distance(&qh) <= bound + 1e-9);
    }
}

#[test]
fn drift_estimate_matches_clt() {
    let cfg = BrownianConfig { alpha: 0.3, sigma: 2.0, initial_price: 0.0 };
    let paths = generate_paths(&[cfg], 3334, 11, "clt");
    let incs: Vec<f64> = paths.iter().flat_map(|e| e.prices.windows(2).map(|w| w[1] - w[0])).take(100_000).collect();
    assert_eq!(incs.len(), 100_000);
    let mean = incs.iter().sum::<f64>() / incs.len() as f64;
    assert!((mean - 0.3).abs() <= 4.0 * 2.0 / (1e5f64).sqrt());
}

fn early_late(agent: &dyn ToyAgent, data: &ToyDataset) -> (f64, f64) {
    let mut early = 0.0;
    let mut late = 0.0;
    for e in &data.eval {
        let a = agent.allocate(&e.context());
        early += a.weights()[..10].iter().sum::<f64>();
        late += a.weights()[20..].iter().sum::<f64>();
    }
    (early, late)
}

#[test]
fn aggregated_agent_follows_the_drift() {
    let cem = CemConfig { iterations: 20, ..Default::default() };
    for (alpha, back_loaded) in [(1.0, true), (-1.0, false)] {
        let cfg = [BrownianConfig { alpha, sigma: 0.5, initial_price: 0.0 }];
        let data = ToyDataset::generate(&cfg, 100, 50, 3, PriceAnchor::Decision).unwrap();
        let agent = train_aggregated_agent(&data.train, &cem).unwrap();
        let (early, late) = early_late(&agent, &data);
        assert_eq!(late > early, back_loaded, "alpha {alpha}: early {early}, late {late}");
    }
}

#[test]
fn memorizer_beats_uniform_on_train() {
    let data = ToyDataset::generate(&ordc_core::toy::default_configs(), 50, 10, 5, PriceAnchor::Decision).unwrap();
    let agent = train_memorizing_baseline(&data.train).unwrap();
    let mean: f64 =
        data.train.iter().map(|e| toy_reward(e, &agent.allocate(&e.context()))).sum::<f64>() / data.train.len() as f64;
    assert!(mean >= 0.0);
    let uniform = Allocation::uniform();
    assert!(data.train.iter().all(|e| toy_reward(e, &uniform) == 0.0));
    assert_eq!(uniform.weights().len(), EXEC_LEN);
}

#[test]
fn twap_on_frozen_zero_spread_book_costs_nothing() {
    let cfg = EpisodeConfig::default();
    let day = SyntheticDayConfig {
        num_snapshots: cfg.required_snapshots(),
        mid_volatility: 0.0,
        spread_std_ticks: 0.0,
        spread_mean_ticks: 1.0,
        trade_intensity: 3.0,
        ..Default::default()
    };
    let (mut snaps, meta) = generate_synthetic_day(&day).unwrap();
    // every fill lands at one constant price
    let mid = snaps[0].best_bid();
    for s in &mut snaps {
        for l in s.bids.iter_mut().chain(s.asks.iter_mut()) {
            l.volume = 1_000_000;
        }
        let ask = s.asks[0].price;
        s.asks[0].price = mid;
        s.asks[1].price = ask;
        s.interval = Some(ordc_core::lob::IntervalTrades { high: mid, low: mid, volume_at_high: 1_000_000 });
    }
    let stripped: Vec<_> = snaps
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.bids[0].price = mid;
            s
        })
        .collect();
    let record = run_episode(&stripped, meta, &cfg, &TwapPolicy { config: cfg.clone() }).unwrap();
    assert_eq!(record.executed_volume(), record.target_volume);
    assert_abs_diff_eq!(trading_cost(&record).unwrap(), 0.0, epsilon = 1e-9);
}

fn slices_from(days: &[(Vec<ordc_core::lob::LobSnapshot>, ordc_core::lob::DayMeta)], len: usize) -> Vec<EpisodeSlice<'_>> {
    days.iter().map(|(s, m)| EpisodeSlice { snapshots: &s[..len], meta: *m }).collect()
}

#[test]
fn backtest_is_deterministic_and_consistent() {
    let cfg = EpisodeConfig::default();
    let n = cfg.required_snapshots();
    let days: Vec<_> = (0..24)
        .map(|i| generate_synthetic_day(&SyntheticDayConfig { seed: 500 + i, num_snapshots: n, ..Default::default() }).unwrap())
        .collect();
    let slices = slices_from(&days, n);
    let (train, eval) = slices.split_at(12);
    let policy = TwapPolicy { config: cfg.clone() };
    let a = backtest(&policy, train, eval, &cfg).unwrap();
    let b = backtest(&policy, train, eval, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.gap_bp, a.eval.mean_cost_bp - a.train.mean_cost_bp);
    assert!(backtest(&policy, &[], eval, &cfg).is_err());
}

#[test]
fn gap_vanishes_for_one_distribution() {
    let cfg = EpisodeConfig::default();
    let n = cfg.required_snapshots();
    let days: Vec<_> = (0..2000)
        .map(|i| {
            generate_synthetic_day(&SyntheticDayConfig { seed: 10_000 + i, num_snapshots: n, ..Default::default() })
                .unwrap()
        })
        .collect();
    let slices = slices_from(&days, n);
    let (train, eval) = slices.split_at(1000);
    let rep = backtest(&TwapPolicy { config: cfg.clone() }, train, eval, &cfg).unwrap();
    let se = (rep.train.std_cost_bp.powi(2) / 1000.0 + rep.eval.std_cost_bp.powi(2) / 1000.0).sqrt();
    assert!(rep.gap_bp.abs() <= 2.0 * se, "gap {} se {}", rep.gap_bp, se);
}

#[test]
fn q_learning_recovers_hard_instance_values() {
    let model = ordc_core::theory::build_hard_instance(3, 0.2, 0.4, &[true, false, true], 0.6).unwrap();
    let vi = value_iteration(&model, 1e-12, 100_000).unwrap();
    let cfg = QLearningConfig {
        episodes: 5000,
        max_steps: 30,
        lr_exponent: 0.7,
        epsilon_start: 0.0,
        epsilon_end: 0.0,
        initial_value: Some(0.0),
        seed: 9,
    };
    let res = q_learn(&mut ModelEnv::new(&model), &cfg).unwrap();
    let err = (0..model.num_latent()).map(|x| (res.q[[x, 0]] - vi.q[[x, 0, 0]]).abs()).fold(0.0, f64::max);
    assert!(err < 0.05, "sup error {err}");
}

/// Bandit-like chain with rewards in [0, 0.9] and random transitions.
struct Chain {
    state: usize,
}

impl TabularEnv for Chain {
    fn num_states(&self) -> usize {
        4
    }
    fn num_actions(&self) -> usize {
        5
    }
    fn gamma(&self) -> f64 {
        0.7
    }
    fn reset(&mut self, rng: &mut SimRng) -> usize {
        self.state = rng.random_range(0..4);
        self.state
    }
    fn step(&mut self, action: usize, rng: &mut SimRng) -> TabularStep {
        let reward = 0.9 * ((self.state + action) % 5) as f64 / 4.0;
        self.state = rng.random_range(0..4);
        TabularStep { next_state: self.state, reward, terminal: false }
    }
}

#[test]
fn optimistic_start_tries_every_action() {
    let cfg = QLearningConfig {
        episodes: 200,
        max_steps: 50,
        epsilon_start: 0.0,
        epsilon_end: 0.0,
        initial_value: None,
        ..Default::default()
    };
    let res = q_learn(&mut Chain { state: 0 }, &cfg).unwrap();
    for s in 0..4 {
        if res.visits.row(s).sum() > 0 {
            assert!(res.visits.row(s).iter().all(|&v| v >= 1), "state {s}: {:?}", res.visits.row(s));
        }
    }
    let hi = 1.0 / (1.0 - 0.7);
    assert!(res.q.iter().all(|&v| (0.0..=hi).contains(&v)));
}
