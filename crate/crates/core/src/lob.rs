//! Five-level order-book snapshots and the matching rules used by the
//! execution simulator.
//!
//! Market orders walk the visible levels of a single snapshot. Resting sell
//! limit orders are matched against the trade summary of the interval that a
//! snapshot closes: a strictly higher traded price fills the order in full, a
//! trade exactly at the quote fills a capped share of the volume printed there.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::price::Price;

/// Visible depth of every snapshot.
pub const BOOK_DEPTH: usize = 5;

/// Length of the vector produced by [`normalize_snapshot`].
pub const SNAPSHOT_FEATURE_DIM: usize = 4 * BOOK_DEPTH + 4;

/// Default share of at-the-quote interval volume a resting order may capture.
pub const DEFAULT_FILL_CAP_RATIO: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LobError {
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("no execution")]
    NoExecution,
    #[error("degenerate day metadata: {0}")]
    DegenerateMeta(String),
    #[error("fill cap ratio must lie in (0, 1], got {0}")]
    InvalidFillCap(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceLevel {
    pub price: Price,
    pub volume: u64,
}

impl PriceLevel {
    pub const fn new(price: Price, volume: u64) -> Self {
        Self { price, volume }
    }
}

/// Trade summary for the interval ending at a snapshot.
///
/// Only the volume printed at the interval high is kept. Nothing traded above
/// the high, so this is exactly the volume traded at or above the high.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalTrades {
    pub high: Price,
    pub low: Price,
    pub volume_at_high: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobSnapshot {
    /// Seconds since the day open.
    pub timestamp: f64,
    /// Ascending by price.
    pub asks: [PriceLevel; BOOK_DEPTH],
    /// Descending by price.
    pub bids: [PriceLevel; BOOK_DEPTH],
    /// `None` when nothing traded since the previous snapshot.
    pub interval: Option<IntervalTrades>,
    pub last_price: Price,
}

impl LobSnapshot {
    pub fn best_ask(&self) -> Price {
        self.asks[0].price
    }

    pub fn best_bid(&self) -> Price {
        self.bids[0].price
    }

    pub fn interval_high(&self) -> Option<Price> {
        self.interval.map(|i| i.high)
    }

    pub fn interval_low(&self) -> Option<Price> {
        self.interval.map(|i| i.low)
    }

    /// Shares printed at `price` or higher during the interval.
    ///
    /// Exact for `price >= high`. Below the high only the high print is known,
    /// so the result is a lower bound.
    pub fn volume_at_or_above(&self, price: Price) -> u64 {
        match self.interval {
            Some(i) if price <= i.high => i.volume_at_high,
            _ => 0,
        }
    }

    /// Shares printed at `price` or lower. Known only when the whole interval
    /// printed at a single price; otherwise reported conservatively as zero.
    pub fn volume_at_or_below(&self, price: Price) -> u64 {
        match self.interval {
            Some(i) if i.low == i.high && price >= i.low => i.volume_at_high,
            _ => 0,
        }
    }

    pub fn total_depth(&self, side: Side) -> u64 {
        self.levels_against(side).iter().map(|l| l.volume).sum()
    }

    /// The levels an incoming order on `side` trades against.
    pub fn levels_against(&self, side: Side) -> &[PriceLevel; BOOK_DEPTH] {
        match side {
            Side::Sell => &self.bids,
            Side::Buy => &self.asks,
        }
    }

    pub fn validate(&self) -> Result<(), LobError> {
        let bad = |m: String| Err(LobError::InvalidSnapshot(m));
        if !self.timestamp.is_finite() {
            return bad("non-finite timestamp".into());
        }
        if self.best_ask() <= self.best_bid() {
            return bad(format!("crossed book: bid {} >= ask {}", self.best_bid(), self.best_ask()));
        }
        if !self.best_bid().is_positive() {
            return bad("non-positive bid price".into());
        }
        if self.asks.windows(2).any(|w| w[1].price <= w[0].price) {
            return bad("ask prices not strictly ascending".into());
        }
        if self.bids.windows(2).any(|w| w[1].price >= w[0].price) {
            return bad("bid prices not strictly descending".into());
        }
        if !self.bids[BOOK_DEPTH - 1].price.is_positive() {
            return bad("non-positive bid price".into());
        }
        if let Some(i) = self.interval {
            if i.low > i.high {
                return bad(format!("interval low {} above high {}", i.low, i.high));
            }
            if !i.low.is_positive() {
                return bad("non-positive interval trade price".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderKind {
    Market,
    Limit(Price),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub side: Side,
    pub kind: OrderKind,
    pub quantity: u64,
}

impl Order {
    pub fn market(side: Side, quantity: u64) -> Result<Self, LobError> {
        Self::new(side, OrderKind::Market, quantity)
    }

    pub fn limit(side: Side, price: Price, quantity: u64) -> Result<Self, LobError> {
        if !price.is_positive() {
            return Err(LobError::InvalidOrder(format!("limit price {price} not positive")));
        }
        Self::new(side, OrderKind::Limit(price), quantity)
    }

    fn new(side: Side, kind: OrderKind, quantity: u64) -> Result<Self, LobError> {
        if quantity == 0 {
            return Err(LobError::InvalidOrder("quantity must be positive".into()));
        }
        Ok(Self { side, kind, quantity })
    }
}

/// Executions of one order, level by level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub side: Side,
    pub executed_qty: u64,
    pub per_level: Vec<(Price, u64)>,
    /// Σ price·qty in fixed-point units.
    notional: i128,
}

impl Fill {
    pub fn empty(side: Side) -> Self {
        Self { side, executed_qty: 0, per_level: Vec::new(), notional: 0 }
    }

    pub fn push(&mut self, price: Price, qty: u64) {
        if qty == 0 {
            return;
        }
        self.executed_qty += qty;
        self.notional += price.units() as i128 * qty as i128;
        self.per_level.push((price, qty));
    }

    pub fn extend(&mut self, other: &Fill) {
        for &(p, q) in &other.per_level {
            self.push(p, q);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.executed_qty == 0
    }

    /// Σ price·qty as currency.
    pub fn notional(&self) -> f64 {
        self.notional as f64 / crate::price::PRICE_SCALE as f64
    }

    pub fn notional_units(&self) -> i128 {
        self.notional
    }

    /// Average execution price rounded to the nearest fixed-point unit.
    pub fn avg_price(&self) -> Option<Price> {
        if self.executed_qty == 0 {
            return None;
        }
        let q = self.executed_qty as i128;
        let n = self.notional;
        let avg = if n >= 0 { (2 * n + q) / (2 * q) } else { -((-2 * n + q) / (2 * q)) };
        Some(Price::from_units(avg as i64))
    }

    pub fn avg_price_f64(&self) -> Option<f64> {
        (self.executed_qty > 0).then(|| self.notional() / self.executed_qty as f64)
    }
}

/// Mid price and spread of the top of book.
pub fn mid_and_spread(snapshot: &LobSnapshot) -> (Price, Price) {
    let (ask, bid) = (snapshot.best_ask(), snapshot.best_bid());
    (Price::midpoint(ask, bid), ask - bid)
}

/// Walk the opposite side best-first. Fills at most the visible depth.
pub fn execute_market_order(snapshot: &LobSnapshot, side: Side, qty: u64) -> Fill {
    let mut fill = Fill::empty(side);
    let mut remaining = qty;
    for level in snapshot.levels_against(side) {
        if remaining == 0 {
            break;
        }
        let take = remaining.min(level.volume);
        fill.push(level.price, take);
        remaining -= take;
    }
    fill
}

/// Price concession of a fill relative to `mid`: `mid - avg` for sells,
/// `avg - mid` for buys.
pub fn temporary_impact(fill: &Fill, mid: Price) -> Result<Price, LobError> {
    let avg = fill.avg_price().ok_or(LobError::NoExecution)?;
    Ok(match fill.side {
        Side::Sell => mid - avg,
        Side::Buy => avg - mid,
    })
}

/// Match a resting limit order against the trades printed during the
/// interval that `snapshot` closes.
pub fn match_limit_order_interval(
    order: &Order,
    snapshot: &LobSnapshot,
    fill_cap_ratio: f64,
) -> Result<Fill, LobError> {
    if !(fill_cap_ratio > 0.0 && fill_cap_ratio <= 1.0) {
        return Err(LobError::InvalidFillCap(fill_cap_ratio));
    }
    let OrderKind::Limit(limit) = order.kind else {
        return Err(LobError::InvalidOrder("interval matching needs a limit order".into()));
    };
    let mut fill = Fill::empty(order.side);
    let Some(trades) = snapshot.interval else {
        return Ok(fill);
    };
    let capped = |volume: u64| ((fill_cap_ratio * volume as f64).floor() as u64).min(order.quantity);
    let qty = match order.side {
        Side::Sell if trades.high > limit => order.quantity,
        Side::Sell if trades.high == limit => capped(snapshot.volume_at_or_above(limit)),
        Side::Buy if trades.low < limit => order.quantity,
        Side::Buy if trades.low == limit => capped(snapshot.volume_at_or_below(limit)),
        _ => 0,
    };
    fill.push(limit, qty);
    Ok(fill)
}

/// Per-day normalization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayMeta {
    #[serde(rename = "open")]
    pub open_price: Price,
    /// Previous day's price volatility in currency units.
    #[serde(rename = "prev_vol")]
    pub prev_day_volatility: f64,
    #[serde(rename = "prev_volume")]
    pub prev_day_total_volume: u64,
}

impl DayMeta {
    pub fn validate(&self) -> Result<(), LobError> {
        if !self.open_price.is_positive() {
            return Err(LobError::DegenerateMeta(format!("open price {}", self.open_price)));
        }
        if !(self.prev_day_volatility.is_finite() && self.prev_day_volatility > 0.0) {
            return Err(LobError::DegenerateMeta(format!("volatility {}", self.prev_day_volatility)));
        }
        if self.prev_day_total_volume == 0 {
            return Err(LobError::DegenerateMeta("zero previous-day volume".into()));
        }
        Ok(())
    }

    pub fn normalize_price(&self, price: f64) -> f64 {
        (price - self.open_price.to_f64()) / self.prev_day_volatility
    }

    pub fn denormalize_price(&self, z: f64) -> f64 {
        z * self.prev_day_volatility + self.open_price.to_f64()
    }

    pub fn normalize_volume(&self, volume: f64) -> f64 {
        volume / self.prev_day_total_volume as f64
    }
}

/// Snapshot features with prices z-scored against the day open and volumes
/// scaled by the previous day's total volume.
///
/// Layout: ask prices, ask volumes, bid prices, bid volumes (five each), then
/// last price, interval high, interval low and volume at the interval high.
/// When nothing traded the interval prices fall back to the last price.
pub fn normalize_snapshot(snapshot: &LobSnapshot, meta: &DayMeta) -> Result<Vec<f64>, LobError> {
    meta.validate()?;
    let px = |p: Price| meta.normalize_price(p.to_f64());
    let vol = |v: u64| meta.normalize_volume(v as f64);
    let mut out = Vec::with_capacity(SNAPSHOT_FEATURE_DIM);
    out.extend(snapshot.asks.iter().map(|l| px(l.price)));
    out.extend(snapshot.asks.iter().map(|l| vol(l.volume)));
    out.extend(snapshot.bids.iter().map(|l| px(l.price)));
    out.extend(snapshot.bids.iter().map(|l| vol(l.volume)));
    out.push(px(snapshot.last_price));
    out.push(px(snapshot.interval_high().unwrap_or(snapshot.last_price)));
    out.push(px(snapshot.interval_low().unwrap_or(snapshot.last_price)));
    out.push(vol(snapshot.interval.map_or(0, |i| i.volume_at_high)));
    Ok(out)
}
