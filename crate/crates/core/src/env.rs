//! Episodic sell-side execution environment.
//!
//! An episode replays a slice of snapshots. The agent decides once per
//! decision interval; between decisions the simulator walks every snapshot of
//! the interval, matching the single order placed for that step. Orders are
//! withdrawn at the end of each step, and whatever inventory is left on the
//! final step is sold with a market order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lob::{
    execute_market_order, match_limit_order_interval, mid_and_spread, normalize_snapshot, DayMeta, Fill,
    LobError, LobSnapshot, Order, Side, SNAPSHOT_FEATURE_DIM,
};
use crate::price::Price;

/// Quoted price offsets relative to the best ask, in basis points.
pub const PRICE_OFFSETS_BP: [i32; 33] = [
    -50, -40, -30, -25, -20, -15, -10, -9, -8, -7, -6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
    15, 20, 25, 30, 40, 50,
];

/// Quoted volume as a multiple of the per-step TWAP volume.
pub const VOLUME_MULTIPLIERS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

pub const NUM_ACTIONS: usize = PRICE_OFFSETS_BP.len() * VOLUME_MULTIPLIERS.len();

/// Extra window features appended to the normalized decision snapshot.
pub const WINDOW_FEATURE_DIM: usize = 6;

/// Length of an observation's context vector.
pub const CONTEXT_DIM: usize = SNAPSHOT_FEATURE_DIM + WINDOW_FEATURE_DIM;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("slice too short: need {needed} snapshots, got {got}")]
    SliceTooShort { needed: usize, got: usize },
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("episode already done")]
    EpisodeDone,
    #[error("nothing executed")]
    NothingExecuted,
    #[error(transparent)]
    Lob(#[from] LobError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardUnits {
    /// Volumes as fractions of the target, prices z-scored with the day metadata.
    Normalized,
    /// Shares and currency.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub horizon_steps: usize,
    pub decision_interval_s: u32,
    pub snapshot_interval_s: u32,
    /// Target as a fraction of the previous day's volume.
    pub target_volume_fraction: f64,
    /// Explicit target in shares; overrides the fraction when set.
    pub target_volume: Option<u64>,
    /// Delay before a crossing order reaches the book.
    pub mo_delay_s: f64,
    pub beta: f64,
    pub discount: f64,
    pub fill_cap_ratio: f64,
    pub tick: Price,
    pub reward_units: RewardUnits,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 30,
            decision_interval_s: 60,
            snapshot_interval_s: 3,
            target_volume_fraction: 0.005,
            target_volume: None,
            mo_delay_s: 3.0,
            beta: 0.1,
            discount: 0.99,
            fill_cap_ratio: crate::lob::DEFAULT_FILL_CAP_RATIO,
            tick: Price::from_cents(1),
            reward_units: RewardUnits::Normalized,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be positive");
        }
        if self.snapshot_interval_s == 0 || !self.decision_interval_s.is_multiple_of(self.snapshot_interval_s) {
            return bad("decision interval must be a positive multiple of the snapshot interval");
        }
        if self.decision_interval_s == 0 {
            return bad("decision interval must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !(self.fill_cap_ratio > 0.0 && self.fill_cap_ratio <= 1.0) {
            return bad("fill_cap_ratio must lie in (0, 1]");
        }
        if !self.tick.is_positive() {
            return bad("tick must be positive");
        }
        if !(self.mo_delay_s >= 0.0 && self.mo_delay_s.is_finite()) {
            return bad("mo_delay_s must be non-negative");
        }
        if self.target_volume == Some(0) {
            return bad("target_volume must be positive");
        }
        if self.target_volume.is_none() && !(self.target_volume_fraction > 0.0) {
            return bad("target_volume_fraction must be positive");
        }
        Ok(())
    }

    pub fn snapshots_per_step(&self) -> usize {
        (self.decision_interval_s / self.snapshot_interval_s) as usize
    }

    /// Minimum slice length for one episode.
    pub fn required_snapshots(&self) -> usize {
        self.horizon_steps * self.snapshots_per_step() + 1
    }

    pub fn resolve_target(&self, meta: &DayMeta) -> u64 {
        self.target_volume
            .unwrap_or_else(|| (self.target_volume_fraction * meta.prev_day_total_volume as f64).round() as u64)
    }

    /// Per-step TWAP volume.
    pub fn twap_step_volume(&self, target: u64) -> f64 {
        target as f64 / self.horizon_steps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecAction {
    /// Index into [`PRICE_OFFSETS_BP`].
    pub price_level: usize,
    /// Index into [`VOLUME_MULTIPLIERS`].
    pub volume_level: usize,
}

impl ExecAction {
    /// Look an action up by its grid values.
    pub fn new(offset_bp: i32, volume_multiplier: f64) -> Result<Self, EnvError> {
        let price_level = PRICE_OFFSETS_BP
            .iter()
            .position(|&o| o == offset_bp)
            .ok_or_else(|| EnvError::InvalidAction(format!("price offset {offset_bp}bp not on the grid")))?;
        let volume_level = VOLUME_MULTIPLIERS
            .iter()
            .position(|&m| m == volume_multiplier)
            .ok_or_else(|| EnvError::InvalidAction(format!("volume multiplier {volume_multiplier} not on the grid")))?;
        Ok(Self { price_level, volume_level })
    }

    pub fn from_index(index: usize) -> Result<Self, EnvError> {
        if index >= NUM_ACTIONS {
            return Err(EnvError::InvalidAction(format!("action index {index} >= {NUM_ACTIONS}")));
        }
        Ok(Self { price_level: index / VOLUME_MULTIPLIERS.len(), volume_level: index % VOLUME_MULTIPLIERS.len() })
    }

    pub fn index(&self) -> usize {
        self.price_level * VOLUME_MULTIPLIERS.len() + self.volume_level
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.price_level >= PRICE_OFFSETS_BP.len() || self.volume_level >= VOLUME_MULTIPLIERS.len() {
            return Err(EnvError::InvalidAction(format!("{self:?} outside the action grid")));
        }
        Ok(())
    }

    pub fn offset_bp(&self) -> i32 {
        PRICE_OFFSETS_BP[self.price_level]
    }

    pub fn volume_multiplier(&self) -> f64 {
        VOLUME_MULTIPLIERS[self.volume_level]
    }

    /// Quote `offset_bp` basis points away from `best_ask`, rounded to `tick`.
    pub fn quoted_price(&self, best_ask: Price, tick: Price) -> Price {
        let raw = best_ask.units() as i128 * (10_000 + self.offset_bp() as i128);
        let units = if raw >= 0 { (raw + 5_000) / 10_000 } else { (raw - 5_000) / 10_000 };
        Price::from_units(units as i64).round_to_tick(tick)
    }

    pub fn quoted_volume(&self, twap_step_volume: f64) -> u64 {
        (self.volume_multiplier() * twap_step_volume).round() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateState {
    pub remaining_steps: usize,
    pub remaining_inventory: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub context: Vec<f64>,
    pub state: PrivateState,
    pub target_volume: u64,
    /// Relative mid change over the last decision interval; zero on the first step.
    pub last_mid_return: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub revenue: f64,
    pub twap_deviation: f64,
    pub observation: Observation,
    pub done: bool,
    pub fills: Vec<Fill>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub quoted_price: Price,
    pub quoted_volume: u64,
    pub executed_qty: u64,
    pub avg_price: Option<f64>,
    pub reward: f64,
    /// Inventory after the step.
    pub inventory: u64,
    pub market_qty: u64,
    pub limit_qty: u64,
    pub forced_qty: u64,
    pub fills: Vec<(Price, u64)>,
}

/// Everything needed to score an episode after the fact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub target_volume: u64,
    pub steps: Vec<StepRecord>,
    /// Mid price at every decision time.
    pub decision_mids: Vec<Price>,
    pub unsold: u64,
}

impl EpisodeRecord {
    pub fn executed_volume(&self) -> u64 {
        self.steps.iter().map(|s| s.executed_qty).sum()
    }

    /// Cash received, in currency.
    pub fn cash_inflow(&self) -> f64 {
        let units: i128 = self
            .steps
            .iter()
            .flat_map(|s| &s.fills)
            .map(|&(p, q)| p.units() as i128 * q as i128)
            .sum();
        units as f64 / crate::price::PRICE_SCALE as f64
    }

    pub fn to_csv(&self) -> Result<String, EnvError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "quoted_price", "quoted_volume", "executed_qty", "avg_price", "reward", "inventory"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.quoted_price.to_string(),
                s.quoted_volume.to_string(),
                s.executed_qty.to_string(),
                s.avg_price.map(|p| p.to_string()).unwrap_or_default(),
                s.reward.to_string(),
                s.inventory.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| EnvError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One-line digest used to compare runs.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for r in &self.steps {
            let _ = write!(s, "{}:{}:{}:{}:{:x};", r.step, r.quoted_price, r.executed_qty, r.inventory, r.reward.to_bits());
        }
        s
    }
}

/// Trading cost of a sell program in basis points against the average
/// decision-time mid.
pub fn trading_cost(record: &EpisodeRecord) -> Result<f64, EnvError> {
    let volume = record.executed_volume();
    if volume == 0 || record.decision_mids.is_empty() {
        return Err(EnvError::NothingExecuted);
    }
    let avg_exec = record.cash_inflow() / volume as f64;
    let twap = record.decision_mids.iter().map(|p| p.to_f64()).sum::<f64>() / record.decision_mids.len() as f64;
    Ok((twap - avg_exec) / twap * 1e4)
}

/// Mean normalized mid and spread over `slice[start..=end]`.
pub fn window_twap_spread(slice: &[LobSnapshot], start: usize, end: usize, meta: &DayMeta) -> (f64, f64) {
    let window = &slice[start..=end];
    let n = window.len() as f64;
    let (mut mid_sum, mut spread_sum) = (0.0, 0.0);
    for snap in window {
        let (mid, spread) = mid_and_spread(snap);
        mid_sum += meta.normalize_price(mid.to_f64());
        spread_sum += spread.to_f64() / meta.prev_day_volatility;
    }
    (mid_sum / n, spread_sum / n)
}

/// Context vector observed at `slice[index]`: the normalized snapshot plus a
/// summary of the preceding `window` snapshots.
pub fn context_features(
    slice: &[LobSnapshot],
    meta: &DayMeta,
    index: usize,
    window: usize,
) -> Result<Vec<f64>, LobError> {
    let snap = &slice[index];
    let mut out = normalize_snapshot(snap, meta)?;
    let start = index.saturating_sub(window);
    let (mid, spread) = mid_and_spread(snap);
    let (twap, mean_spread) = window_twap_spread(slice, start, index, meta);
    let start_mid = mid_and_spread(&slice[start]).0;
    let traded: u64 = slice[start + 1..=index].iter().map(|s| s.interval.map_or(0, |i| i.volume_at_high)).sum();
    let z_mid = meta.normalize_price(mid.to_f64());
    out.extend([
        z_mid,
        twap,
        spread.to_f64() / meta.prev_day_volatility,
        mean_spread,
        z_mid - meta.normalize_price(start_mid.to_f64()),
        meta.normalize_volume(traded as f64),
    ]);
    Ok(out)
}

/// The policy interface used by rollouts and backtests.
pub trait ExecutionPolicy: Sync {
    fn act(&self, observation: &Observation) -> ExecAction;
}

pub struct ExecutionEnv<'a> {
    slice: &'a [LobSnapshot],
    meta: DayMeta,
    config: EpisodeConfig,
    target: u64,
    step: usize,
    inventory: u64,
    record: EpisodeRecord,
}

impl<'a> ExecutionEnv<'a> {
    /// Start an episode on `slice`; returns the environment and the first observation.
    pub fn reset(
        slice: &'a [LobSnapshot],
        meta: DayMeta,
        config: EpisodeConfig,
    ) -> Result<(Self, Observation), EnvError> {
        config.validate()?;
        meta.validate()?;
        let needed = config.required_snapshots();
        if slice.len() < needed {
            return Err(EnvError::SliceTooShort { needed, got: slice.len() });
        }
        let target = config.resolve_target(&meta);
        if target == 0 {
            return Err(EnvError::InvalidConfig("target volume resolves to zero".into()));
        }
        let env = Self {
            slice,
            meta,
            config,
            target,
            step: 0,
            inventory: target,
            record: EpisodeRecord { target_volume: target, ..Default::default() },
        };
        let obs = env.observation()?;
        Ok((env, obs))
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn target_volume(&self) -> u64 {
        self.target
    }

    pub fn state(&self) -> PrivateState {
        PrivateState { remaining_steps: self.config.horizon_steps - self.step, remaining_inventory: self.inventory }
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.horizon_steps
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    fn decision_index(&self, step: usize) -> usize {
        step * self.config.snapshots_per_step()
    }

    fn observation(&self) -> Result<Observation, EnvError> {
        let sps = self.config.snapshots_per_step();
        let idx = self.decision_index(self.step);
        let context = context_features(self.slice, &self.meta, idx, sps)?;
        let last_mid_return = if self.step == 0 {
            0.0
        } else {
            let now = mid_and_spread(&self.slice[idx]).0.to_f64();
            let prev = mid_and_spread(&self.slice[idx - sps]).0.to_f64();
            now / prev - 1.0
        };
        Ok(Observation {
            step: self.step,
            context,
            state: self.state(),
            target_volume: self.target,
            last_mid_return,
        })
    }

    /// First snapshot at or after `timestamp`, searching from `from`.
    fn snapshot_at_or_after(&self, from: usize, timestamp: f64) -> usize {
        (from..self.slice.len()).find(|&j| self.slice[j].timestamp >= timestamp).unwrap_or(self.slice.len() - 1)
    }

    pub fn step(&mut self, action: ExecAction) -> Result<StepResult, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        action.validate()?;
        let sps = self.config.snapshots_per_step();
        let base = self.decision_index(self.step);
        let decision = &self.slice[base];
        self.record.decision_mids.push(mid_and_spread(decision).0);

        let quoted_price = action.quoted_price(decision.best_ask(), self.config.tick);
        let quoted_qty = action.quoted_volume(self.config.twap_step_volume(self.target)).min(self.inventory);

        // Bids above the quote are taken immediately, after the order delay.
        let crossing: u64 = decision
            .bids
            .iter()
            .filter(|l| l.price > quoted_price)
            .map(|l| l.volume)
            .sum::<u64>()
            .min(quoted_qty);
        let mut fills = Vec::new();
        let mut market_qty = 0;
        if crossing > 0 {
            let at = self.snapshot_at_or_after(base, decision.timestamp + self.config.mo_delay_s);
            let mo = execute_market_order(&self.slice[at], Side::Sell, crossing);
            market_qty = mo.executed_qty;
            fills.push(mo);
        }

        let mut resting = quoted_qty - market_qty;
        let mut limit_qty = 0;
        if resting > 0 {
            let mut lo_fill = Fill::empty(Side::Sell);
            for snap in &self.slice[base + 1..=base + sps] {
                let order = Order::limit(Side::Sell, quoted_price, resting)?;
                let f = match_limit_order_interval(&order, snap, self.config.fill_cap_ratio)?;
                resting -= f.executed_qty;
                lo_fill.extend(&f);
                if resting == 0 {
                    break;
                }
            }
            limit_qty = lo_fill.executed_qty;
            if !lo_fill.is_empty() {
                fills.push(lo_fill);
            }
        }
        // Anything still resting is withdrawn here.
        self.inventory -= market_qty + limit_qty;

        let last_step = self.step + 1 == self.config.horizon_steps;
        let mut forced_qty = 0;
        if last_step && self.inventory > 0 {
            let mo = execute_market_order(&self.slice[base + sps], Side::Sell, self.inventory);
            forced_qty = mo.executed_qty;
            self.inventory -= forced_qty;
            if !mo.is_empty() {
                fills.push(mo);
            }
        }

        let mut step_fill = Fill::empty(Side::Sell);
        for f in &fills {
            step_fill.extend(f);
        }
        let executed = step_fill.executed_qty;
        let remaining_steps = self.config.horizon_steps - self.step - 1;
        let twap_inventory = self.target as f64 * remaining_steps as f64 / self.config.horizon_steps as f64;
        let deviation = self.inventory as f64 - twap_inventory;
        let (revenue, twap_deviation) = match self.config.reward_units {
            RewardUnits::Raw => (step_fill.notional(), deviation * deviation),
            RewardUnits::Normalized => {
                let share = executed as f64 / self.target as f64;
                let z = step_fill.avg_price_f64().map_or(0.0, |p| self.meta.normalize_price(p));
                let dev = deviation / self.target as f64;
                (share * z, dev * dev)
            }
        };
        let reward = revenue - self.config.beta * twap_deviation;

        self.record.steps.push(StepRecord {
            step: self.step,
            quoted_price,
            quoted_volume: quoted_qty,
            executed_qty: executed,
            avg_price: step_fill.avg_price_f64(),
            reward,
            inventory: self.inventory,
            market_qty,
            limit_qty,
            forced_qty,
            fills: step_fill.per_level.clone(),
        });
        self.step += 1;
        if self.is_done() {
            self.record.unsold = self.inventory;
        }
        Ok(StepResult {
            reward,
            revenue,
            twap_deviation,
            observation: self.observation()?,
            done: self.is_done(),
            fills,
        })
    }
}

/// Roll `policy` through one full episode.
pub fn run_episode(
    slice: &[LobSnapshot],
    meta: DayMeta,
    config: &EpisodeConfig,
    policy: &dyn ExecutionPolicy,
) -> Result<EpisodeRecord, EnvError> {
    let (mut env, mut obs) = ExecutionEnv::reset(slice, meta, config.clone())?;
    while !env.is_done() {
        let action = policy.act(&obs);
        obs = env.step(action)?.observation;
    }
    Ok(env.into_record())
}
