//! Snapshot-day files and the synthetic day generator.
//!
//! A day is a CSV file of snapshots with the fixed header in [`CSV_HEADER`]
//! and a sibling `<stem>.meta.json` holding the [`DayMeta`] used for
//! normalization. Prices are written as decimal strings so a write/load cycle
//! is exact.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lob::{DayMeta, IntervalTrades, LobSnapshot, PriceLevel, BOOK_DEPTH};
use crate::price::Price;
use crate::rng::{stream, SimRng};

pub const CSV_HEADER: [&str; 25] = [
    "ts", "ap1", "ap2", "ap3", "ap4", "ap5", "av1", "av2", "av3", "av4", "av5", "bp1", "bp2", "bp3", "bp4", "bp5",
    "bv1", "bv2", "bv3", "bv4", "bv5", "last", "ihigh", "ilow", "ivol",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("metadata: {0}")]
    Meta(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Path of the metadata record that accompanies a day file.
pub fn meta_path(day_path: &Path) -> PathBuf {
    day_path.with_extension("meta.json")
}

pub fn write_snapshot_day(path: &Path, snapshots: &[LobSnapshot], meta: &DayMeta) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for s in snapshots {
        let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
        row.push(s.timestamp.to_string());
        row.extend(s.asks.iter().map(|l| l.price.to_string()));
        row.extend(s.asks.iter().map(|l| l.volume.to_string()));
        row.extend(s.bids.iter().map(|l| l.price.to_string()));
        row.extend(s.bids.iter().map(|l| l.volume.to_string()));
        row.push(s.last_price.to_string());
        match s.interval {
            Some(i) => {
                row.push(i.high.to_string());
                row.push(i.low.to_string());
                row.push(i.volume_at_high.to_string());
            }
            None => row.extend([String::new(), String::new(), "0".to_string()]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    let mp = meta_path(path);
    let json = serde_json::to_string_pretty(meta).map_err(|e| DataError::Meta(e.to_string()))?;
    fs::write(&mp, json).map_err(io_err(&mp))?;
    Ok(())
}

pub fn load_snapshot_day(path: &Path) -> Result<(Vec<LobSnapshot>, DayMeta), DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rdr.headers()?.clone();
    if header.len() != CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(DataError::SchemaMismatch(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::InvalidRow { row, reason: e.to_string() })?;
        let snap = parse_row(&rec).map_err(|reason| DataError::InvalidRow { row, reason })?;
        snap.validate().map_err(|e| DataError::InvalidRow { row, reason: e.to_string() })?;
        if let Some(prev) = out.last().map(|s: &LobSnapshot| s.timestamp) {
            if snap.timestamp <= prev {
                return Err(DataError::InvalidRow { row, reason: "timestamp not increasing".into() });
            }
        }
        out.push(snap);
    }
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
    let meta: DayMeta = serde_json::from_str(&text).map_err(|e| DataError::Meta(e.to_string()))?;
    meta.validate().map_err(|e| DataError::Meta(e.to_string()))?;
    Ok((out, meta))
}

fn parse_row(rec: &csv::StringRecord) -> Result<LobSnapshot, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len()));
    }
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    let price = |i: usize| field(i).parse::<Price>().map_err(|e| format!("{}: {e}", CSV_HEADER[i]));
    let volume = |i: usize| field(i).parse::<u64>().map_err(|e| format!("{}: {e}", CSV_HEADER[i]));
    let timestamp: f64 = field(0).parse().map_err(|e| format!("ts: {e}"))?;
    let mut asks = [PriceLevel::new(Price::ZERO, 0); BOOK_DEPTH];
    let mut bids = asks;
    for k in 0..BOOK_DEPTH {
        asks[k] = PriceLevel::new(price(1 + k)?, volume(6 + k)?);
        bids[k] = PriceLevel::new(price(11 + k)?, volume(16 + k)?);
    }
    let last_price = price(21)?;
    let ivol = volume(24)?;
    let interval = match (field(22).is_empty(), field(23).is_empty()) {
        (true, true) if ivol == 0 => None,
        (false, false) => Some(IntervalTrades { high: price(22)?, low: price(23)?, volume_at_high: ivol }),
        _ => return Err("interval high/low must both be present or both empty with ivol 0".into()),
    };
    Ok(LobSnapshot { timestamp, asks, bids, interval, last_price })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDayConfig {
    pub seed: u64,
    pub num_snapshots: usize,
    pub snapshot_interval_s: u32,
    pub start_price: Price,
    pub tick: Price,
    /// Standard deviation of the fair-price change per snapshot, in currency.
    pub mid_volatility: f64,
    pub spread_mean_ticks: f64,
    pub spread_std_ticks: f64,
    /// AR(1) coefficient of the latent spread driver.
    pub spread_persistence: f64,
    pub spread_floor_ticks: u32,
    /// Mean resting volume per level, best level first.
    pub depth: [u64; BOOK_DEPTH],
    /// Relative uniform jitter applied to each level's volume.
    pub depth_jitter: f64,
    /// Mean number of trades per snapshot interval.
    pub trade_intensity: f64,
    pub mean_trade_size: f64,
    /// Overrides for the generated metadata.
    pub prev_day_volatility: Option<f64>,
    pub prev_day_total_volume: Option<u64>,
}

impl Default for SyntheticDayConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_snapshots: 4800,
            snapshot_interval_s: 3,
            start_price: Price::from_cents(10_000),
            tick: Price::from_cents(1),
            mid_volatility: 0.01,
            spread_mean_ticks: 1.5,
            spread_std_ticks: 0.5,
            spread_persistence: 0.9,
            spread_floor_ticks: 1,
            depth: [600, 900, 1200, 1500, 2000],
            depth_jitter: 0.5,
            trade_intensity: 2.0,
            mean_trade_size: 100.0,
            prev_day_volatility: None,
            prev_day_total_volume: None,
        }
    }
}

impl SyntheticDayConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        if self.num_snapshots == 0 || self.snapshot_interval_s == 0 {
            return bad("num_snapshots and snapshot_interval_s must be positive");
        }
        if !self.tick.is_positive() || !self.start_price.is_positive() {
            return bad("tick and start_price must be positive");
        }
        if self.spread_floor_ticks < 1 {
            return bad("spread floor must be at least one tick");
        }
        if self.depth.contains(&0) {
            return bad("depths must be positive");
        }
        if !(0.0..1.0).contains(&self.depth_jitter) {
            return bad("depth_jitter must lie in [0, 1)");
        }
        if !(self.mid_volatility >= 0.0 && self.spread_std_ticks >= 0.0 && self.trade_intensity >= 0.0) {
            return bad("volatility, spread std and trade intensity must be non-negative");
        }
        if !(self.mean_trade_size >= 1.0) {
            return bad("mean_trade_size must be at least 1");
        }
        if !(-1.0 < self.spread_persistence && self.spread_persistence < 1.0) {
            return bad("spread_persistence must lie in (-1, 1)");
        }
        if self.start_price.ticks(self.tick) <= 2 * BOOK_DEPTH as i64 {
            return bad("start price too close to zero for a five-level book");
        }
        Ok(())
    }

    fn meta(&self, open: Price) -> DayMeta {
        let n = self.num_snapshots as f64;
        DayMeta {
            open_price: open,
            prev_day_volatility: self
                .prev_day_volatility
                .unwrap_or_else(|| (self.mid_volatility * n.sqrt()).max(self.tick.to_f64())),
            prev_day_total_volume: self
                .prev_day_total_volume
                .unwrap_or_else(|| ((n * self.trade_intensity * self.mean_trade_size).round() as u64).max(1)),
        }
    }
}

/// Generate one trading day of snapshots.
///
/// A latent fair price follows a Gaussian random walk. Each snapshot quotes a
/// spread of whole ticks around it, so bid and ask always sit on the tick
/// grid. Trades printed in the interval before a snapshot hit the touch of
/// either the previous or the current book.
pub fn generate_synthetic_day(config: &SyntheticDayConfig) -> Result<(Vec<LobSnapshot>, DayMeta), DataError> {
    config.validate()?;
    let mut rng = stream(config.seed, "synthetic-day", 0);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let trade_count = (config.trade_intensity > 0.0).then(|| Poisson::new(config.trade_intensity).unwrap());
    let trade_size = Exp::new(1.0 / config.mean_trade_size).unwrap();
    let tick = config.tick.units() as f64;
    let min_bid_ticks = BOOK_DEPTH as i64;

    let mut fair = config.start_price.units() as f64;
    let mut spread_driver = 0.0f64;
    let innovation_scale = (1.0 - config.spread_persistence.powi(2)).sqrt();
    let mut out: Vec<LobSnapshot> = Vec::with_capacity(config.num_snapshots);
    let mut last_price = config.start_price.round_to_tick(config.tick);

    for k in 0..config.num_snapshots {
        if k > 0 {
            fair += config.mid_volatility * 1e8 * std_normal.sample(&mut rng);
        }
        spread_driver = config.spread_persistence * spread_driver + innovation_scale * std_normal.sample(&mut rng);
        let spread_ticks = (config.spread_mean_ticks + config.spread_std_ticks * spread_driver)
            .round()
            .max(config.spread_floor_ticks as f64) as i64;
        let bid_ticks = ((fair / tick) - spread_ticks as f64 / 2.0).round() as i64;
        let bid_ticks = bid_ticks.max(min_bid_ticks);
        let ask_ticks = bid_ticks + spread_ticks;

        let mut asks = [PriceLevel::new(Price::ZERO, 0); BOOK_DEPTH];
        let mut bids = asks;
        for i in 0..BOOK_DEPTH {
            let mut vol = || {
                let j = 1.0 + config.depth_jitter * (2.0 * rng.random::<f64>() - 1.0);
                ((config.depth[i] as f64 * j).round() as u64).max(1)
            };
            asks[i] = PriceLevel::new(config.tick.times(ask_ticks + i as i64), vol());
            bids[i] = PriceLevel::new(config.tick.times(bid_ticks - i as i64), vol());
        }

        let mut interval = None;
        if let (Some(prev), Some(count)) = (out.last(), trade_count.as_ref()) {
            let n = count.sample(&mut rng) as usize;
            let mut trades: Vec<(Price, u64)> = Vec::with_capacity(n);
            for _ in 0..n {
                let use_prev = rng.random::<bool>();
                let buyer = rng.random::<bool>();
                let price = match (buyer, use_prev) {
                    (true, true) => prev.best_ask(),
                    (true, false) => asks[0].price,
                    (false, true) => prev.best_bid(),
                    (false, false) => bids[0].price,
                };
                let size = (trade_size.sample(&mut rng).ceil() as u64).max(1);
                trades.push((price, size));
            }
            if let Some(&(last, _)) = trades.last() {
                let high = trades.iter().map(|t| t.0).max().unwrap();
                let low = trades.iter().map(|t| t.0).min().unwrap();
                let volume_at_high = trades.iter().filter(|t| t.0 == high).map(|t| t.1).sum();
                interval = Some(IntervalTrades { high, low, volume_at_high });
                last_price = last;
            }
        }

        out.push(LobSnapshot {
            timestamp: (k as u64 * config.snapshot_interval_s as u64) as f64,
            asks,
            bids,
            interval,
            last_price,
        });
    }
    let open = crate::lob::mid_and_spread(&out[0]).0;
    Ok((out, config.meta(open)))
}

/// Uniformly drawn start indices of `count` windows of `len` snapshots.
pub fn sample_slice_starts(day_len: usize, len: usize, count: usize, rng: &mut SimRng) -> Vec<usize> {
    assert!(day_len >= len, "day shorter than the requested slice");
    (0..count).map(|_| rng.random_range(0..=day_len - len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::mid_and_spread;

    fn tiny_config(seed: u64) -> SyntheticDayConfig {
        SyntheticDayConfig { seed, num_snapshots: 200, ..Default::default() }
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("day.csv");
        let (snaps, meta) = generate_synthetic_day(&tiny_config(3)).unwrap();
        write_snapshot_day(&path, &snaps, &meta).unwrap();
        let (back, back_meta) = load_snapshot_day(&path).unwrap();
        assert_eq!(back, snaps);
        assert_eq!(back_meta, meta);
        assert!(meta_path(&path).ends_with("day.meta.json"));
    }

    #[test]
    fn three_row_file_loads_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let (snaps, meta) = generate_synthetic_day(&tiny_config(4)).unwrap();
        write_snapshot_day(&path, &snaps[..3], &meta).unwrap();
        let (back, _) = load_snapshot_day(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert!(back.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn crossed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let (mut snaps, meta) = generate_synthetic_day(&tiny_config(5)).unwrap();
        snaps.truncate(3);
        snaps[1].bids[0].price = snaps[1].asks[0].price;
        write_snapshot_day(&path, &snaps, &meta).unwrap();
        match load_snapshot_day(&path) {
            Err(DataError::InvalidRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected invalid row, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let (snaps, meta) = generate_synthetic_day(&tiny_config(6)).unwrap();
        write_snapshot_day(&path, &snaps[..2], &meta).unwrap();
        let text = fs::read_to_string(&path).unwrap().replacen(",ivol", "", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_snapshot_day(&path), Err(DataError::SchemaMismatch(_))));
    }

    #[test]
    fn frozen_market_has_constant_mid() {
        let cfg = SyntheticDayConfig { mid_volatility: 0.0, spread_std_ticks: 0.0, ..tiny_config(1) };
        let (snaps, meta) = generate_synthetic_day(&cfg).unwrap();
        let mid0 = mid_and_spread(&snaps[0]).0;
        assert!(snaps.iter().all(|s| mid_and_spread(s).0 == mid0));
        meta.validate().unwrap();
    }

    #[test]
    fn same_seed_same_day() {
        let a = generate_synthetic_day(&tiny_config(9)).unwrap();
        let b = generate_synthetic_day(&tiny_config(9)).unwrap();
        let c = generate_synthetic_day(&tiny_config(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn generated_days_satisfy_invariants() {
        let mut total = 0;
        for seed in 0..3 {
            let (snaps, meta) = generate_synthetic_day(&SyntheticDayConfig { seed, ..Default::default() }).unwrap();
            assert_eq!(snaps.len(), 4800);
            meta.validate().unwrap();
            for s in &snaps {
                s.validate().unwrap();
                assert!(s.best_ask() - s.best_bid() >= Price::from_cents(1));
                if let Some(i) = s.interval {
                    assert!(i.volume_at_high > 0);
                }
            }
            total += snaps.len();
        }
        assert!(total >= 10_000);
    }

    #[test]
    fn spread_mean_is_stationary() {
        let (snaps, _) = generate_synthetic_day(&SyntheticDayConfig { seed: 2, ..Default::default() }).unwrap();
        let mean = |s: &[LobSnapshot]| s.iter().map(|x| mid_and_spread(x).1.to_f64()).sum::<f64>() / s.len() as f64;
        let (first, second) = snaps.split_at(snaps.len() / 2);
        let (a, b) = (mean(first), mean(second));
        assert!((a - b).abs() <= 0.1 * a.max(b), "{a} vs {b}");
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_synthetic_day(&SyntheticDayConfig { spread_floor_ticks: 0, ..Default::default() }).is_err());
        assert!(generate_synthetic_day(&SyntheticDayConfig { depth: [0, 1, 1, 1, 1], ..Default::default() }).is_err());
    }
}
