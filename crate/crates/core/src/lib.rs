//! Limit-order-book execution simulator and tabular toolkit for offline RL
//! with dynamic context.
//!
//! * [`lob`] holds book snapshots and the order matching rules.
//! * [`env`] is the episodic sell-side execution environment.
//! * [`data`] loads snapshot days from CSV and generates synthetic ones.
//! * [`features`] computes future-window statistics, fits the linear context
//!   encoder and bins its output into latent context ids.
//! * [`theory`] covers tabular latent-context models: hard instances, value
//!   iteration, the count-based transition estimator and the experiments
//!   built on them.
//! * [`toy`] is the Brownian-price allocation task used to compare a
//!   memorizing learner with a drift/volatility-aggregating one.
//! * [`agents`] has TWAP and momentum baselines, tabular Q-learning and the
//!   backtest harness.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod data;
pub mod env;
pub mod features;
pub mod lob;
pub mod price;
pub mod rng;
pub mod theory;
pub mod toy;

pub use price::Price;
