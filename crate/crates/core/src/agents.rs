//! Execution policies and the harness that trains and scores them.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    run_episode, trading_cost, EnvError, EpisodeConfig, ExecAction, ExecutionEnv, ExecutionPolicy, Observation,
    PrivateState, RewardUnits, NUM_ACTIONS,
};
use crate::features::{EncoderDocument, FeatureError};
use crate::lob::{DayMeta, LobSnapshot};
use crate::rng::{stream, SimRng};
use crate::theory::OrdcModel;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub fn twap_policy(_state: &PrivateState, _config: &EpisodeConfig) -> ExecAction {
    ExecAction::new(0, 1.0).expect("zero offset is on the grid")
}

/// Sell more after the mid has risen over the last interval, less after it fell.
pub fn momentum_policy(_state: &PrivateState, last_mid_return: f64, _config: &EpisodeConfig) -> ExecAction {
    let mult = if last_mid_return > 0.0 {
        1.5
    } else if last_mid_return < 0.0 {
        0.5
    } else {
        1.0
    };
    ExecAction::new(0, mult).expect("multiplier is on the grid")
}

#[derive(Clone, Debug, Default)]
pub struct TwapPolicy {
    pub config: EpisodeConfig,
}

impl ExecutionPolicy for TwapPolicy {
    fn act(&self, obs: &Observation) -> ExecAction {
        twap_policy(&obs.state, &self.config)
    }
}

#[derive(Clone, Debug, Default)]
pub struct MomentumPolicy {
    pub config: EpisodeConfig,
}

impl ExecutionPolicy for MomentumPolicy {
    fn act(&self, obs: &Observation) -> ExecAction {
        momentum_policy(&obs.state, obs.last_mid_return, &self.config)
    }
}

/// A finite environment seen through integer states and actions.
pub trait TabularEnv {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Upper bound on a single reward; rewards are assumed to lie in `[0, r_max]`.
    fn reward_max(&self) -> f64 {
        1.0
    }
    fn reset(&mut self, rng: &mut SimRng) -> usize;
    fn step(&mut self, action: usize, rng: &mut SimRng) -> TabularStep;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TabularStep {
    pub next_state: usize,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningConfig {
    pub episodes: usize,
    /// Steps after which an episode is cut off without treating the state as terminal.
    pub max_steps: usize,
    /// Learning rate `1 / n^omega` with `n` the visit count of the pair.
    pub lr_exponent: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Initial table value; `None` means the optimistic bound `r_max / (1 - gamma)`.
    pub initial_value: Option<f64>,
    pub seed: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            max_steps: 1000,
            lr_exponent: 0.8,
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            initial_value: Some(0.0),
            seed: 0,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.episodes == 0 || self.max_steps == 0 {
            return Err(AgentError::InvalidConfig("episodes and max_steps must be positive".into()));
        }
        if !(self.lr_exponent > 0.5 && self.lr_exponent <= 1.0) {
            return Err(AgentError::InvalidConfig("lr_exponent must lie in (0.5, 1]".into()));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return Err(AgentError::InvalidConfig("epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearningResult {
    pub q: Array2<f64>,
    pub visits: Array2<u64>,
}

impl QLearningResult {
    pub fn greedy(&self, state: usize) -> usize {
        argmax(self.q.row(state).iter().copied())
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Q-learning with epsilon-greedy exploration. Epsilon decays linearly over
/// episodes; table entries are clipped to `[0, r_max / (1 - gamma)]`.
pub fn q_learn<E: TabularEnv>(env: &mut E, config: &QLearningConfig) -> Result<QLearningResult, AgentError> {
    config.validate()?;
    let (ns, na, gamma) = (env.num_states(), env.num_actions(), env.gamma());
    if !(0.0..1.0).contains(&gamma) {
        return Err(AgentError::InvalidConfig("discount must lie in [0, 1)".into()));
    }
    let q_hi = env.reward_max() / (1.0 - gamma);
    let init = config.initial_value.unwrap_or(q_hi).clamp(0.0, q_hi);
    let mut q = Array2::from_elem((ns, na), init);
    let mut visits = Array2::<u64>::zeros((ns, na));
    let mut rng = stream(config.seed, "q-learning", 0);
    for ep in 0..config.episodes {
        let frac = if config.episodes > 1 { ep as f64 / (config.episodes - 1) as f64 } else { 1.0 };
        let eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
        let mut s = env.reset(&mut rng);
        for _ in 0..config.max_steps {
            let a = if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random_range(0..na)
            } else {
                argmax(q.row(s).iter().copied())
            };
            let step = env.step(a, &mut rng);
            visits[[s, a]] += 1;
            let lr = (visits[[s, a]] as f64).powf(-config.lr_exponent);
            let bootstrap = if step.terminal {
                0.0
            } else {
                q.row(step.next_state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = step.reward + gamma * bootstrap;
            q[[s, a]] = (q[[s, a]] + lr * (target - q[[s, a]])).clamp(0.0, q_hi);
            if step.terminal {
                break;
            }
            s = step.next_state;
        }
    }
    Ok(QLearningResult { q, visits })
}

/// A factored model run as an environment. Episodes start from a uniformly
/// drawn joint state.
pub struct ModelEnv<'a> {
    model: &'a OrdcModel,
    state: usize,
}

impl<'a> ModelEnv<'a> {
    pub fn new(model: &'a OrdcModel) -> Self {
        Self { model, state: 0 }
    }
}

fn draw(probs: impl Iterator<Item = f64>, rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

impl TabularEnv for ModelEnv<'_> {
    fn num_states(&self) -> usize {
        self.model.num_latent() * self.model.num_states()
    }

    fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    fn gamma(&self) -> f64 {
        self.model.gamma
    }

    fn reset(&mut self, rng: &mut SimRng) -> usize {
        self.state = rng.random_range(0..self.num_states());
        self.state
    }

    fn step(&mut self, action: usize, rng: &mut SimRng) -> TabularStep {
        let ns = self.model.num_states();
        let (x, s) = (self.state / ns, self.state % ns);
        let reward = self.model.r[[x, s, action]];
        let x2 = draw(self.model.px.row(x).iter().copied(), rng);
        let s2 = draw(self.model.ps.slice(ndarray::s![x, s, action, ..]).iter().copied(), rng);
        self.state = x2 * ns + s2;
        TabularStep { next_state: self.state, reward, terminal: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BucketConfig {
    pub time_buckets: usize,
    pub inventory_buckets: usize,
    /// Environment rewards in `[reward_low, reward_high]` map affinely onto `[0, 1]`.
    pub reward_low: f64,
    pub reward_high: f64,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self { time_buckets: 6, inventory_buckets: 10, reward_low: -1.0, reward_high: 1.0 }
    }
}

impl BucketConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.time_buckets == 0 || self.inventory_buckets == 0 {
            return Err(AgentError::InvalidConfig("bucket counts must be positive".into()));
        }
        if !(self.reward_low < self.reward_high) {
            return Err(AgentError::InvalidConfig("reward_low must be below reward_high".into()));
        }
        Ok(())
    }

    pub fn time_bucket(&self, step: usize, horizon: usize) -> usize {
        (step * self.time_buckets / horizon.max(1)).min(self.time_buckets - 1)
    }

    pub fn inventory_bucket(&self, remaining: u64, target: u64) -> usize {
        let b = (self.inventory_buckets as u128 * remaining as u128 / target.max(1) as u128) as usize;
        b.min(self.inventory_buckets - 1)
    }

    pub fn scale_reward(&self, r: f64) -> f64 {
        ((r - self.reward_low) / (self.reward_high - self.reward_low)).clamp(0.0, 1.0)
    }
}

/// One replayable episode: a slice of snapshots with its day metadata.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeSlice<'a> {
    pub snapshots: &'a [LobSnapshot],
    pub meta: DayMeta,
}

fn state_index(latent: usize, time: usize, inv: usize, buckets: &BucketConfig) -> usize {
    (latent * buckets.time_buckets + time) * buckets.inventory_buckets + inv
}

/// The execution environment seen through the encoder, bins and buckets.
pub struct ExecTabularEnv<'a> {
    slices: &'a [EpisodeSlice<'a>],
    encoder: &'a EncoderDocument,
    buckets: BucketConfig,
    config: EpisodeConfig,
    current: Option<ExecutionEnv<'a>>,
}

impl<'a> ExecTabularEnv<'a> {
    pub fn new(
        slices: &'a [EpisodeSlice<'a>],
        encoder: &'a EncoderDocument,
        buckets: BucketConfig,
        config: EpisodeConfig,
    ) -> Result<Self, AgentError> {
        if slices.is_empty() {
            return Err(AgentError::EmptySplit("training slices".into()));
        }
        buckets.validate()?;
        config.validate()?;
        Ok(Self { slices, encoder, buckets, config, current: None })
    }

    fn encode(&self, obs: &Observation) -> usize {
        let latent = self.encoder.latent_id(&obs.context).expect("context matches encoder");
        let time = self.buckets.time_bucket(obs.step, self.config.horizon_steps);
        let inv = self.buckets.inventory_bucket(obs.state.remaining_inventory, obs.target_volume);
        state_index(latent, time, inv, &self.buckets)
    }
}

impl TabularEnv for ExecTabularEnv<'_> {
    fn num_states(&self) -> usize {
        self.encoder.bins.num_ids() * self.buckets.time_buckets * self.buckets.inventory_buckets
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn gamma(&self) -> f64 {
        self.config.discount
    }

    fn reset(&mut self, rng: &mut SimRng) -> usize {
        let slice = self.slices[rng.random_range(0..self.slices.len())];
        let (env, obs) =
            ExecutionEnv::reset(slice.snapshots, slice.meta, self.config.clone()).expect("slices validated on entry");
        self.current = Some(env);
        self.encode(&obs)
    }

    fn step(&mut self, action: usize, _rng: &mut SimRng) -> TabularStep {
        let env = self.current.as_mut().expect("reset before step");
        let res = env.step(ExecAction::from_index(action).expect("action index in range")).expect("episode active");
        let reward = self.buckets.scale_reward(res.reward);
        let done = res.done;
        let next_state = self.encode(&res.observation);
        TabularStep { next_state, reward, terminal: done }
    }
}

/// Greedy policy over `(latent, time bucket, inventory bucket)` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularQAgent {
    pub encoder: EncoderDocument,
    pub buckets: BucketConfig,
    pub horizon_steps: usize,
    /// Row-major `[latent, time, inventory, action]`.
    pub q: Vec<f64>,
}

impl TabularQAgent {
    pub fn dims(&self) -> [usize; 4] {
        [self.encoder.bins.num_ids(), self.buckets.time_buckets, self.buckets.inventory_buckets, NUM_ACTIONS]
    }

    pub fn q_value(&self, latent: usize, time: usize, inv: usize, action: usize) -> f64 {
        self.q[state_index(latent, time, inv, &self.buckets) * NUM_ACTIONS + action]
    }

    pub fn state_of(&self, obs: &Observation) -> Result<usize, AgentError> {
        let latent = self.encoder.latent_id(&obs.context)?;
        let time = self.buckets.time_bucket(obs.step, self.horizon_steps);
        let inv = self.buckets.inventory_bucket(obs.state.remaining_inventory, obs.target_volume);
        Ok(state_index(latent, time, inv, &self.buckets))
    }
}

impl ExecutionPolicy for TabularQAgent {
    fn act(&self, obs: &Observation) -> ExecAction {
        let s = self.state_of(obs).expect("observation matches encoder");
        let a = argmax(self.q[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS].iter().copied());
        ExecAction::from_index(a).expect("action index in range")
    }
}

/// Train a tabular agent on the execution environment. Rewards use
/// normalized units so table values are comparable across days.
pub fn tabular_q_learn(
    slices: &[EpisodeSlice<'_>],
    encoder: &EncoderDocument,
    buckets: BucketConfig,
    episode: &EpisodeConfig,
    schedule: &QLearningConfig,
) -> Result<TabularQAgent, AgentError> {
    let config = EpisodeConfig { reward_units: RewardUnits::Normalized, ..episode.clone() };
    let mut env = ExecTabularEnv::new(slices, encoder, buckets, config.clone())?;
    for s in slices {
        ExecutionEnv::reset(s.snapshots, s.meta, config.clone())?;
    }
    let schedule = QLearningConfig { max_steps: config.horizon_steps, ..schedule.clone() };
    let res = q_learn(&mut env, &schedule)?;
    Ok(TabularQAgent {
        encoder: encoder.clone(),
        buckets,
        horizon_steps: config.horizon_steps,
        q: res.q.into_raw_vec_and_offset().0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeCost {
    pub split: String,
    pub episode_id: usize,
    pub cost_bp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: String,
    pub episodes: usize,
    pub mean_cost_bp: f64,
    pub std_cost_bp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub episodes: Vec<EpisodeCost>,
    pub train: SplitSummary,
    pub eval: SplitSummary,
    /// Eval mean cost minus train mean cost.
    pub gap_bp: f64,
}

impl BacktestReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), AgentError> {
        writeln!(w, "split,episode_id,cost_bp")?;
        for e in &self.episodes {
            writeln!(w, "{},{},{}", e.split, e.episode_id, e.cost_bp)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "train": self.train,
            "eval": self.eval,
            "gap_bp": self.gap_bp,
        }))
        .expect("summary serializes")
    }
}

fn costs(policy: &dyn ExecutionPolicy, slices: &[EpisodeSlice<'_>], config: &EpisodeConfig) -> Result<Vec<f64>, AgentError> {
    slices
        .par_iter()
        .map(|s| {
            let record = run_episode(s.snapshots, s.meta, config, policy)?;
            Ok(trading_cost(&record)?)
        })
        .collect()
}

fn summarize(split: &str, costs: &[f64]) -> SplitSummary {
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = if costs.len() > 1 { costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    SplitSummary { split: split.to_string(), episodes: costs.len(), mean_cost_bp: mean, std_cost_bp: var.sqrt() }
}

/// Roll `policy` once per slice in each split and aggregate trading costs.
pub fn backtest(
    policy: &dyn ExecutionPolicy,
    train: &[EpisodeSlice<'_>],
    eval: &[EpisodeSlice<'_>],
    config: &EpisodeConfig,
) -> Result<BacktestReport, AgentError> {
    if train.is_empty() {
        return Err(AgentError::EmptySplit("train".into()));
    }
    if eval.is_empty() {
        return Err(AgentError::EmptySplit("eval".into()));
    }
    let train_costs = costs(policy, train, config)?;
    let eval_costs = costs(policy, eval, config)?;
    let mut episodes = Vec::with_capacity(train.len() + eval.len());
    for (split, cs) in [("train", &train_costs), ("eval", &eval_costs)] {
        episodes.extend(cs.iter().enumerate().map(|(i, &c)| EpisodeCost {
            split: split.to_string(),
            episode_id: i,
            cost_bp: c,
        }));
    }
    let train = summarize("train", &train_costs);
    let eval = summarize("eval", &eval_costs);
    let gap_bp = eval.mean_cost_bp - train.mean_cost_bp;
    Ok(BacktestReport { episodes, train, eval, gap_bp })
}
