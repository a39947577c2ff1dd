//! Single-price execution task on Brownian paths.
//!
//! Each path has 61 prices. The first 30 increments are the observed context;
//! the agent then splits one unit of inventory over steps 31..=60 and is scored
//! by its discounted execution price against the uniform split.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream;

pub const CONTEXT_LEN: usize = 30;
pub const EXEC_LEN: usize = 30;
pub const PATH_LEN: usize = CONTEXT_LEN + EXEC_LEN + 1;

/// Per-step discount; thirty steps halve the weight.
pub fn toy_gamma() -> f64 {
    (0.5f64.ln() / EXEC_LEN as f64).exp()
}

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("allocation not on the simplex: {0}")]
    NotSimplex(String),
    #[error("empty dataset: {0}")]
    Empty(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub initial_price: f64,
}

impl BrownianConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite() && self.alpha.is_finite() && self.initial_price.is_finite()) {
            return Err(ToyError::InvalidConfig("sigma must be non-negative and all fields finite".into()));
        }
        Ok(())
    }
}

/// Drift grid used by the generalization experiment.
pub fn default_configs() -> Vec<BrownianConfig> {
    [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&alpha| BrownianConfig { alpha, sigma: 1.5, initial_price: 0.0 }).collect()
}

/// Which price of a generated path equals the config's `initial_price`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceAnchor {
    /// `p_0`.
    Start,
    /// `p_30`, the last observed price; the path is shifted after generation.
    #[default]
    Decision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyEpisode {
    pub config_id: usize,
    pub prices: Vec<f64>,
}

impl ToyEpisode {
    pub fn from_prices(config_id: usize, prices: Vec<f64>) -> Result<Self, ToyError> {
        if prices.len() != PATH_LEN {
            return Err(ToyError::InvalidConfig(format!("path needs {PATH_LEN} prices, got {}", prices.len())));
        }
        Ok(Self { config_id, prices })
    }

    /// The 30 observed increments `p_t - p_{t-1}`, t = 1..=30.
    pub fn context(&self) -> Vec<f64> {
        (1..=CONTEXT_LEN).map(|t| self.prices[t] - self.prices[t - 1]).collect()
    }

    /// Prices p_31..=p_60.
    pub fn execution_prices(&self) -> &[f64] {
        &self.prices[CONTEXT_LEN + 1..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(weights: Vec<f64>) -> Result<Self, ToyError> {
        if weights.len() != EXEC_LEN {
            return Err(ToyError::NotSimplex(format!("expected {EXEC_LEN} entries, got {}", weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ToyError::NotSimplex("negative or NaN entry".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(ToyError::NotSimplex(format!("entries sum to {s}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform() -> Self {
        Self(vec![1.0 / EXEC_LEN as f64; EXEC_LEN])
    }

    /// All inventory at execution step `k` (0 = t31).
    pub fn one_hot(k: usize) -> Self {
        let mut w = vec![0.0; EXEC_LEN];
        w[k] = 1.0;
        Self(w)
    }

    /// Normalized exponentials of `scores`.
    pub fn softmax(scores: &[f64]) -> Result<Self, ToyError> {
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        Self::new(e.into_iter().map(|v| v / z).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// Discounted price of the allocation minus that of the uniform split.
pub fn toy_reward(episode: &ToyEpisode, allocation: &Allocation) -> f64 {
    let g = toy_gamma();
    let uniform = 1.0 / EXEC_LEN as f64;
    let mut disc = 1.0;
    let mut r = 0.0;
    for (a, p) in allocation.0.iter().zip(episode.execution_prices()) {
        r += disc * (a - uniform) * p;
        disc *= g;
    }
    r
}

/// Sample mean and population standard deviation of the increments.
pub fn estimate_drift_vol(context: &[f64]) -> (f64, f64) {
    let n = context.len() as f64;
    let mean = context.iter().sum::<f64>() / n;
    let var = context.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn generate_paths(configs: &[BrownianConfig], n_per_config: usize, seed: u64, label: &str) -> Vec<ToyEpisode> {
    (0..configs.len() * n_per_config)
        .into_par_iter()
        .map(|i| {
            let cid = i / n_per_config;
            let cfg = configs[cid];
            let mut rng = stream(seed, label, i as u64);
            let mut prices = Vec::with_capacity(PATH_LEN);
            let mut p = cfg.initial_price;
            prices.push(p);
            for _ in 1..PATH_LEN {
                let xi: f64 = StandardNormal.sample(&mut rng);
                p += cfg.alpha + cfg.sigma * xi;
                prices.push(p);
            }
            ToyEpisode { config_id: cid, prices }
        })
        .collect()
}

/// Shift every price so that `p_30` equals `level`.
pub fn anchor_at_decision(episode: &mut ToyEpisode, level: f64) {
    let shift = level - episode.prices[CONTEXT_LEN];
    for p in &mut episode.prices {
        *p += shift;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyDataset {
    pub configs: Vec<BrownianConfig>,
    pub train: Vec<ToyEpisode>,
    pub eval: Vec<ToyEpisode>,
}

impl ToyDataset {
    /// Train and eval paths come from disjoint RNG streams.
    pub fn generate(
        configs: &[BrownianConfig],
        train_per_config: usize,
        eval_per_config: usize,
        seed: u64,
        anchor: PriceAnchor,
    ) -> Result<Self, ToyError> {
        if configs.is_empty() || train_per_config == 0 || eval_per_config == 0 {
            return Err(ToyError::InvalidConfig("need configs and at least one path per split".into()));
        }
        for c in configs {
            c.validate()?;
        }
        let split = |n, label| {
            let mut eps = generate_paths(configs, n, seed, label);
            if anchor == PriceAnchor::Decision {
                for e in &mut eps {
                    anchor_at_decision(e, configs[e.config_id].initial_price);
                }
            }
            eps
        };
        Ok(Self {
            configs: configs.to_vec(),
            train: split(train_per_config, "toy-train"),
            eval: split(eval_per_config, "toy-eval"),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ToyError> {
        write!(w, "split,config_id")?;
        for t in 0..PATH_LEN {
            write!(w, ",p{t}")?;
        }
        writeln!(w)?;
        for (split, eps) in [("train", &self.train), ("eval", &self.eval)] {
            for e in eps {
                write!(w, "{split},{}", e.config_id)?;
                for p in &e.prices {
                    write!(w, ",{p}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

pub trait ToyAgent: Sync {
    fn allocate(&self, context: &[f64]) -> Allocation;
}

pub struct UniformAgent;

impl ToyAgent for UniformAgent {
    fn allocate(&self, _context: &[f64]) -> Allocation {
        Allocation::uniform()
    }
}

/// Softmax over execution steps with scores `(w0 + w1 alpha_hat + w2 sigma_hat) * (t - 30) / 30`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedAgent {
    pub weights: [f64; 3],
}

impl AggregatedAgent {
    pub fn allocate_stats(&self, alpha_hat: f64, sigma_hat: f64) -> Allocation {
        let [w0, w1, w2] = self.weights;
        let tilt = w0 + w1 * alpha_hat + w2 * sigma_hat;
        let scores: Vec<f64> = (1..=EXEC_LEN).map(|k| tilt * k as f64 / EXEC_LEN as f64).collect();
        Allocation::softmax(&scores).expect("softmax lies on the simplex")
    }
}

impl ToyAgent for AggregatedAgent {
    fn allocate(&self, context: &[f64]) -> Allocation {
        let (a, s) = estimate_drift_vol(context);
        self.allocate_stats(a, s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub init_std: f64,
    pub min_std: f64,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { population: 64, elite_fraction: 0.1, iterations: 50, init_std: 1.0, min_std: 1.0, seed: 0 }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        if self.population < 2 || self.iterations == 0 {
            return Err(ToyError::InvalidConfig("population must be at least 2 and iterations positive".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(ToyError::InvalidConfig("elite_fraction must lie in (0, 1]".into()));
        }
        if !(self.init_std > 0.0 && self.min_std >= 0.0) {
            return Err(ToyError::InvalidConfig("std parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Cross-entropy-method search for the aggregated agent's weights,
/// maximizing mean train reward.
pub fn train_aggregated_agent(train: &[ToyEpisode], config: &CemConfig) -> Result<AggregatedAgent, ToyError> {
    if train.is_empty() {
        return Err(ToyError::Empty("training set"));
    }
    config.validate()?;
    let stats: Vec<(f64, f64)> = train.iter().map(|e| estimate_drift_vol(&e.context())).collect();
    let fitness = |w: [f64; 3]| -> f64 {
        let agent = AggregatedAgent { weights: w };
        train.iter().zip(&stats).map(|(e, &(a, s))| toy_reward(e, &agent.allocate_stats(a, s))).sum::<f64>()
            / train.len() as f64
    };
    let n_elite = ((config.population as f64 * config.elite_fraction).round() as usize).clamp(1, config.population);
    let mut mean = [0.0; 3];
    let mut std = [config.init_std; 3];
    let mut best = ([0.0; 3], fitness([0.0; 3]));
    let mut rng = stream(config.seed, "cem", 0);
    for _ in 0..config.iterations {
        let pop: Vec<[f64; 3]> = (0..config.population)
            .map(|_| {
                let mut w = [0.0; 3];
                for j in 0..3 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w[j] = mean[j] + std[j] * z;
                }
                w
            })
            .collect();
        let scores: Vec<f64> = pop.par_iter().map(|&w| fitness(w)).collect();
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        if scores[order[0]] > best.1 {
            best = (pop[order[0]], scores[order[0]]);
        }
        let elites: Vec<[f64; 3]> = order[..n_elite].iter().map(|&i| pop[i]).collect();
        for j in 0..3 {
            let m = elites.iter().map(|w| w[j]).sum::<f64>() / n_elite as f64;
            let v = elites.iter().map(|w| (w[j] - m).powi(2)).sum::<f64>() / n_elite as f64;
            mean[j] = m;
            std[j] = v.sqrt().max(config.min_std);
        }
    }
    Ok(AggregatedAgent { weights: best.0 })
}

/// Nearest-neighbour lookup over raw training contexts; answers with the
/// one-hot allocation at the best discounted price of the matched path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorizingAgent {
    contexts: Vec<Vec<f64>>,
    peaks: Vec<usize>,
}

impl MemorizingAgent {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}

/// Execution step (0 = t31) maximizing `gamma^k p_{31+k}`, earliest on ties.
pub fn discounted_peak(episode: &ToyEpisode) -> usize {
    let g = toy_gamma();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut disc = 1.0;
    for (k, p) in episode.execution_prices().iter().enumerate() {
        let v = disc * p;
        if v > best_v {
            best = k;
            best_v = v;
        }
        disc *= g;
    }
    best
}

pub fn train_memorizing_baseline(train: &[ToyEpisode]) -> Result<MemorizingAgent, ToyError> {
    if train.is_empty() {
        return Err(ToyError::Empty("training set"));
    }
    Ok(MemorizingAgent {
        contexts: train.iter().map(|e| e.context()).collect(),
        peaks: train.iter().map(discounted_peak).collect(),
    })
}

impl ToyAgent for MemorizingAgent {
    fn allocate(&self, context: &[f64]) -> Allocation {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.contexts.iter().enumerate() {
            let d: f64 = c.iter().zip(context).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Allocation::one_hot(self.peaks[best])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub train_mean: f64,
    pub train_std: f64,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub gap: f64,
    pub n_train: usize,
    pub n_eval: usize,
}

fn rewards(agent: &dyn ToyAgent, eps: &[ToyEpisode]) -> Vec<f64> {
    eps.par_iter().map(|e| toy_reward(e, &agent.allocate(&e.context()))).collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn evaluate_gap(agent: &dyn ToyAgent, dataset: &ToyDataset) -> Result<GapReport, ToyError> {
    if dataset.train.is_empty() || dataset.eval.is_empty() {
        return Err(ToyError::Empty("both splits must be non-empty"));
    }
    let (train_mean, train_std) = mean_std(&rewards(agent, &dataset.train));
    let (eval_mean, eval_std) = mean_std(&rewards(agent, &dataset.eval));
    Ok(GapReport {
        train_mean,
        train_std,
        eval_mean,
        eval_std,
        gap: train_mean - eval_mean,
        n_train: dataset.train.len(),
        n_eval: dataset.eval.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyExperimentConfig {
    pub configs: Vec<BrownianConfig>,
    /// Total training paths, split evenly over configs.
    pub train_size: usize,
    pub eval_size: usize,
    pub seeds: Vec<u64>,
    pub anchor: PriceAnchor,
    pub cem: CemConfig,
}

impl Default for ToyExperimentConfig {
    fn default() -> Self {
        Self {
            configs: default_configs(),
            train_size: 1000,
            eval_size: 1000,
            seeds: (0..5).collect(),
            anchor: PriceAnchor::Decision,
            cem: CemConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub agent: String,
    pub seed: u64,
    pub report: GapReport,
}

/// Train and score the uniform, aggregated and memorizing agents for each seed.
pub fn run_toy_experiment(config: &ToyExperimentConfig) -> Result<Vec<ToyRow>, ToyError> {
    if config.configs.is_empty() || config.seeds.is_empty() {
        return Err(ToyError::InvalidConfig("need at least one config and one seed".into()));
    }
    let k = config.configs.len();
    let per_train = (config.train_size / k).max(1);
    let per_eval = (config.eval_size / k).max(1);
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let data = ToyDataset::generate(&config.configs, per_train, per_eval, seed, config.anchor)?;
        let cem = CemConfig { seed, ..config.cem };
        let aggregated = train_aggregated_agent(&data.train, &cem)?;
        let memorizing = train_memorizing_baseline(&data.train)?;
        let agents: [(&str, &dyn ToyAgent); 3] =
            [("uniform", &UniformAgent), ("aggregated", &aggregated), ("memorizing", &memorizing)];
        for (name, agent) in agents {
            rows.push(ToyRow { agent: name.to_string(), seed, report: evaluate_gap(agent, &data)? });
        }
    }
    Ok(rows)
}

/// One line per agent, split and seed: `agent,split,seed,mean,std,gap`.
pub fn write_toy_report<W: Write>(rows: &[ToyRow], mut w: W) -> Result<(), ToyError> {
    writeln!(w, "agent,split,seed,mean,std,gap")?;
    for r in rows {
        let g = &r.report;
        writeln!(w, "{},train,{},{},{},{}", r.agent, r.seed, g.train_mean, g.train_std, g.gap)?;
        writeln!(w, "{},eval,{},{},{},{}", r.agent, r.seed, g.eval_mean, g.eval_std, g.gap)?;
    }
    Ok(())
}
