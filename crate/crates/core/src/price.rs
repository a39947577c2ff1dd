//! Fixed-point currency amounts.
//!
//! Prices are stored as signed integers in units of 1e-8 currency so that
//! matching, averaging over levels and CSV round-trips never drift.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of fixed-point units per currency unit.
pub const PRICE_SCALE: i64 = 100_000_000;
const PRICE_DECIMALS: usize = 8;

/// Signed fixed-point currency amount (1e-8 resolution).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PriceParseError {
    #[error("empty price string")]
    Empty,
    #[error("invalid price literal {0:?}")]
    Invalid(String),
    #[error("price {0:?} has more than 8 decimal places")]
    TooPrecise(String),
    #[error("price {0:?} out of range")]
    Overflow(String),
}

impl Price {
    pub const ZERO: Price = Price(0);

    pub const fn from_units(units: i64) -> Self {
        Price(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    /// Build a price from `cents` hundredths of a currency unit.
    pub const fn from_cents(cents: i64) -> Self {
        Price(cents * (PRICE_SCALE / 100))
    }

    /// Nearest representable price to `value`.
    pub fn from_f64(value: f64) -> Self {
        Price((value * PRICE_SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / PRICE_SCALE as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Round to the nearest multiple of `tick`, ties away from zero.
    pub fn round_to_tick(self, tick: Price) -> Price {
        assert!(tick.0 > 0, "tick must be positive");
        let t = tick.0 as i128;
        let v = self.0 as i128;
        let q = if v >= 0 { (2 * v + t) / (2 * t) } else { -((-2 * v + t) / (2 * t)) };
        Price((q * t) as i64)
    }

    /// Number of whole ticks, panicking if the price is off-grid.
    pub fn ticks(self, tick: Price) -> i64 {
        assert!(tick.0 > 0, "tick must be positive");
        self.0 / tick.0
    }

    pub fn is_on_grid(self, tick: Price) -> bool {
        tick.0 > 0 && self.0 % tick.0 == 0
    }

    pub fn times(self, n: i64) -> Price {
        Price(self.0 * n)
    }

    /// Average of two prices; exact whenever the sum is even in base units.
    pub fn midpoint(a: Price, b: Price) -> Price {
        Price(((a.0 as i128 + b.0 as i128) / 2) as i64)
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl Neg for Price {
    type Output = Price;
    fn neg(self) -> Price {
        Price(-self.0)
    }
}

impl fmt::Display for Price {
    /// Canonical decimal form with at least two decimals, trailing zeros trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = (self.0 as i128).unsigned_abs();
        let int = abs / PRICE_SCALE as u128;
        let frac = abs % PRICE_SCALE as u128;
        let mut digits = format!("{frac:0width$}", width = PRICE_DECIMALS);
        while digits.len() > 2 && digits.ends_with('0') {
            digits.pop();
        }
        write!(f, "{sign}{int}.{digits}")
    }
}

impl FromStr for Price {
    type Err = PriceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(PriceParseError::Empty);
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !all_digits(int_part) || !all_digits(frac_part) {
            return Err(PriceParseError::Invalid(s.to_string()));
        }
        if frac_part.len() > PRICE_DECIMALS {
            return Err(PriceParseError::TooPrecise(s.to_string()));
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| PriceParseError::Overflow(s.to_string()))?
        };
        let mut frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().unwrap() };
        for _ in frac_part.len()..PRICE_DECIMALS {
            frac *= 10;
        }
        let units = int
            .checked_mul(PRICE_SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| PriceParseError::Overflow(s.to_string()))?;
        Ok(Price(if neg { -units } else { units }))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !v.is_finite() {
            return Err(serde::de::Error::custom("price must be finite"));
        }
        Ok(Price::from_f64(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let p: Price = "29.01".parse().unwrap();
        assert_eq!(p, Price::from_cents(2901));
        assert_eq!(p.to_string(), "29.01");
        assert_eq!("29".parse::<Price>().unwrap().to_string(), "29.00");
        assert_eq!("-0.005".parse::<Price>().unwrap().to_string(), "-0.005");
        assert_eq!(".5".parse::<Price>().unwrap(), Price::from_cents(50));
        assert!("1.123456789".parse::<Price>().is_err());
        assert!("abc".parse::<Price>().is_err());
        assert!("".parse::<Price>().is_err());
    }

    #[test]
    fn tick_rounding() {
        let tick = Price::from_cents(1);
        assert_eq!("29.115".parse::<Price>().unwrap().round_to_tick(tick), Price::from_cents(2912));
        assert_eq!("29.114".parse::<Price>().unwrap().round_to_tick(tick), Price::from_cents(2911));
        assert_eq!("-0.015".parse::<Price>().unwrap().round_to_tick(tick), Price::from_cents(-2));
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(units in -1_000_000_000_000i64..1_000_000_000_000i64) {
            let p = Price::from_units(units);
            prop_assert_eq!(p.to_string().parse::<Price>().unwrap(), p);
        }
    }
}
