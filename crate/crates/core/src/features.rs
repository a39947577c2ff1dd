//! Future-statistic targets, a closed-form ridge encoder that predicts them
//! from the current context, and the binning map from predictions to a
//! latent context id.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{context_features, window_twap_spread, EpisodeConfig};
use crate::lob::{DayMeta, LobError, LobSnapshot};

pub const NUM_FUTURE_STATS: usize = 8;

pub const FUTURE_STAT_NAMES: [&str; NUM_FUTURE_STATS] = [
    "d_avg_twap",
    "d_max_twap",
    "d_min_twap",
    "twap_vol",
    "d_avg_sprd",
    "d_max_sprd",
    "d_min_sprd",
    "sprd_vol",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("rank deficient; increase lambda")]
    RankDeficient,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lob(#[from] LobError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FutureStats {
    pub d_avg_twap: f64,
    pub d_max_twap: f64,
    pub d_min_twap: f64,
    pub twap_vol: f64,
    pub d_avg_sprd: f64,
    pub d_max_sprd: f64,
    pub d_min_sprd: f64,
    pub sprd_vol: f64,
}

impl FutureStats {
    pub fn to_array(&self) -> [f64; NUM_FUTURE_STATS] {
        [
            self.d_avg_twap,
            self.d_max_twap,
            self.d_min_twap,
            self.twap_vol,
            self.d_avg_sprd,
            self.d_max_sprd,
            self.d_min_sprd,
            self.sprd_vol,
        ]
    }

    pub fn from_array(a: [f64; NUM_FUTURE_STATS]) -> Self {
        Self {
            d_avg_twap: a[0],
            d_max_twap: a[1],
            d_min_twap: a[2],
            twap_vol: a[3],
            d_avg_sprd: a[4],
            d_max_sprd: a[5],
            d_min_sprd: a[6],
            sprd_vol: a[7],
        }
    }
}

/// (avg, max, min, population std) of a non-empty series. The mean is clamped
/// into [min, max] so rounding never breaks the ordering.
fn summary(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = (xs.iter().sum::<f64>() / n).clamp(min, max);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, max, min, var.sqrt())
}

pub fn future_statistics(
    future_twaps: &[f64],
    future_spreads: &[f64],
    current_twap: f64,
    current_spread: f64,
) -> Result<FutureStats, FeatureError> {
    if future_twaps.is_empty() {
        return Err(FeatureError::Empty("future twap series"));
    }
    if future_spreads.is_empty() {
        return Err(FeatureError::Empty("future spread series"));
    }
    let (ta, tx, tn, tv) = summary(future_twaps);
    let (sa, sx, sn, sv) = summary(future_spreads);
    Ok(FutureStats {
        d_avg_twap: ta - current_twap,
        d_max_twap: tx - current_twap,
        d_min_twap: tn - current_twap,
        twap_vol: tv,
        d_avg_sprd: sa - current_spread,
        d_max_sprd: sx - current_spread,
        d_min_sprd: sn - current_spread,
        sprd_vol: sv,
    })
}

/// Linear map from context features to predicted future statistics:
/// `y_j = intercept_j + sum_i weights[i][j] * (x_i - mean_i) / scale_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEncoder {
    pub feature_dim: usize,
    /// Row-major `feature_dim x 8`.
    pub weights: Vec<f64>,
    pub ridge_lambda: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub intercept: [f64; NUM_FUTURE_STATS],
}

impl LinearEncoder {
    pub fn weight(&self, feature: usize, stat: usize) -> f64 {
        self.weights[feature * NUM_FUTURE_STATS + stat]
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let d = self.feature_dim;
        if self.weights.len() != d * NUM_FUTURE_STATS || self.feature_mean.len() != d || self.feature_scale.len() != d {
            return Err(FeatureError::Invalid("encoder arrays inconsistent with feature_dim".into()));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(FeatureError::Invalid("ridge_lambda must be non-negative".into()));
        }
        let all_finite = self.weights.iter().chain(&self.feature_mean).chain(&self.intercept).all(|v| v.is_finite());
        if !all_finite || self.feature_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(FeatureError::Invalid("encoder parameters must be finite with positive scales".into()));
        }
        Ok(())
    }

    pub fn predict(&self, features: &[f64]) -> Result<[f64; NUM_FUTURE_STATS], FeatureError> {
        if features.len() != self.feature_dim {
            return Err(FeatureError::DimensionMismatch { expected: self.feature_dim, got: features.len() });
        }
        let mut out = self.intercept;
        for (i, &x) in features.iter().enumerate() {
            let z = (x - self.feature_mean[i]) / self.feature_scale[i];
            let row = &self.weights[i * NUM_FUTURE_STATS..(i + 1) * NUM_FUTURE_STATS];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * z;
            }
        }
        Ok(out)
    }

    /// Ridge objective `sum ||W^T z - (y - b)||^2 + lambda ||W||^2` on the given data.
    pub fn objective(&self, features: &[Vec<f64>], targets: &[[f64; NUM_FUTURE_STATS]]) -> Result<f64, FeatureError> {
        let mut loss = 0.0;
        for (x, y) in features.iter().zip(targets) {
            let p = self.predict(x)?;
            loss += p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(loss + self.ridge_lambda * self.weights.iter().map(|w| w * w).sum::<f64>())
    }
}

fn check_inputs(features: &[Vec<f64>], targets: &[[f64; NUM_FUTURE_STATS]], lambda: f64) -> Result<usize, FeatureError> {
    if features.is_empty() {
        return Err(FeatureError::Empty("features"));
    }
    if targets.len() != features.len() {
        return Err(FeatureError::DimensionMismatch { expected: features.len(), got: targets.len() });
    }
    let d = features[0].len();
    if d == 0 {
        return Err(FeatureError::Empty("feature vector"));
    }
    if let Some(bad) = features.iter().find(|r| r.len() != d) {
        return Err(FeatureError::DimensionMismatch { expected: d, got: bad.len() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FeatureError::Invalid("ridge_lambda must be finite and non-negative".into()));
    }
    let finite = features.iter().flatten().chain(targets.iter().flatten()).all(|v| v.is_finite());
    if !finite {
        return Err(FeatureError::Invalid("non-finite entry in training data".into()));
    }
    Ok(d)
}

/// Solve `(Z^T Z + lambda I) W = Z^T Y` for `W` (d x 8).
fn ridge_solve(z: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>, FeatureError> {
    let d = z.ncols();
    let gram = z.transpose() * z + DMatrix::<f64>::identity(d, d) * lambda;
    if lambda == 0.0 {
        let sv = gram.singular_values();
        let max = sv.max();
        if max <= 0.0 || sv.min() <= max * 1e-12 * d as f64 {
            return Err(FeatureError::RankDeficient);
        }
    }
    let chol = gram.cholesky().ok_or(FeatureError::RankDeficient)?;
    Ok(chol.solve(&(z.transpose() * y)))
}

fn targets_matrix(targets: &[[f64; NUM_FUTURE_STATS]], offset: &[f64; NUM_FUTURE_STATS]) -> DMatrix<f64> {
    DMatrix::from_fn(targets.len(), NUM_FUTURE_STATS, |r, c| targets[r][c] - offset[c])
}

fn flatten_weights(w: &DMatrix<f64>) -> Vec<f64> {
    (0..w.nrows()).flat_map(|r| (0..w.ncols()).map(move |c| (r, c))).map(|(r, c)| w[(r, c)]).collect()
}

/// Plain ridge regression without intercept or feature scaling.
pub fn fit_linear_encoder(
    features: &[Vec<f64>],
    targets: &[[f64; NUM_FUTURE_STATS]],
    ridge_lambda: f64,
) -> Result<LinearEncoder, FeatureError> {
    let d = check_inputs(features, targets, ridge_lambda)?;
    let z = DMatrix::from_fn(features.len(), d, |r, c| features[r][c]);
    let w = ridge_solve(&z, &targets_matrix(targets, &[0.0; NUM_FUTURE_STATS]), ridge_lambda)?;
    Ok(LinearEncoder {
        feature_dim: d,
        weights: flatten_weights(&w),
        ridge_lambda,
        feature_mean: vec![0.0; d],
        feature_scale: vec![1.0; d],
        intercept: [0.0; NUM_FUTURE_STATS],
    })
}

/// Ridge regression on standardized features with an unpenalized intercept.
/// Constant features get scale 1 and a zero weight.
pub fn fit_standardized_encoder(
    features: &[Vec<f64>],
    targets: &[[f64; NUM_FUTURE_STATS]],
    ridge_lambda: f64,
) -> Result<LinearEncoder, FeatureError> {
    let d = check_inputs(features, targets, ridge_lambda)?;
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for row in features {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; d];
    for row in features {
        for i in 0..d {
            scale[i] += (row[i] - mean[i]).powi(2) / n;
        }
    }
    let active: Vec<usize> = (0..d).filter(|&i| scale[i].sqrt() > 1e-12).collect();
    let scale: Vec<f64> = scale.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    let mut intercept = [0.0; NUM_FUTURE_STATS];
    for y in targets {
        for (b, v) in intercept.iter_mut().zip(y) {
            *b += v / n;
        }
    }
    let mut weights = vec![0.0; d * NUM_FUTURE_STATS];
    if !active.is_empty() {
        let z = DMatrix::from_fn(features.len(), active.len(), |r, c| {
            let i = active[c];
            (features[r][i] - mean[i]) / scale[i]
        });
        let w = ridge_solve(&z, &targets_matrix(targets, &intercept), ridge_lambda)?;
        for (c, &i) in active.iter().enumerate() {
            for j in 0..NUM_FUTURE_STATS {
                weights[i * NUM_FUTURE_STATS + j] = w[(c, j)];
            }
        }
    }
    Ok(LinearEncoder {
        feature_dim: d,
        weights,
        ridge_lambda,
        feature_mean: mean,
        feature_scale: scale,
        intercept,
    })
}

/// Bin edges for a subset of the predicted statistics.
///
/// Cell `k` of a statistic holds values in `[edges[k-1], edges[k])`; the id is
/// the mixed-radix combination with the first listed statistic least
/// significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    pub stats: Vec<usize>,
    pub edges: Vec<Vec<f64>>,
}

impl BinConfig {
    pub fn new(stats: Vec<usize>, edges: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        let cfg = Self { stats, edges };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.stats.is_empty() || self.stats.len() != self.edges.len() {
            return Err(FeatureError::Invalid("one edge list per selected statistic required".into()));
        }
        if let Some(&s) = self.stats.iter().find(|&&s| s >= NUM_FUTURE_STATS) {
            return Err(FeatureError::Invalid(format!("statistic index {s} out of range")));
        }
        for e in &self.edges {
            if e.iter().any(|v| !v.is_finite()) || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(FeatureError::Invalid("bin edges must be finite and strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn num_ids(&self) -> usize {
        self.edges.iter().map(|e| e.len() + 1).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.edges.len());
        let mut s = 1;
        for e in &self.edges {
            out.push(s);
            s *= e.len() + 1;
        }
        out
    }

    /// Cell of `value` along the `dim`-th selected statistic.
    pub fn cell(&self, dim: usize, value: f64) -> usize {
        self.edges[dim].partition_point(|&e| e <= value)
    }

    pub fn id_of_cells(&self, cells: &[usize]) -> usize {
        cells.iter().zip(self.strides()).map(|(c, s)| c * s).sum()
    }

    pub fn cells_of_id(&self, mut id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .map(|e| {
                let radix = e.len() + 1;
                let c = id % radix;
                id /= radix;
                c
            })
            .collect()
    }

    pub fn id_of_prediction(&self, prediction: &[f64; NUM_FUTURE_STATS]) -> usize {
        let cells: Vec<usize> = self.stats.iter().enumerate().map(|(dim, &s)| self.cell(dim, prediction[s])).collect();
        self.id_of_cells(&cells)
    }
}

/// Empirical quantile edges of the predictions for each selected statistic,
/// deduplicated so they stay strictly increasing.
pub fn quantile_bins(
    predictions: &[[f64; NUM_FUTURE_STATS]],
    stats: &[usize],
    quantiles: &[f64],
) -> Result<BinConfig, FeatureError> {
    if predictions.is_empty() {
        return Err(FeatureError::Empty("predictions"));
    }
    let edges = stats
        .iter()
        .map(|&s| {
            let mut col: Vec<f64> = predictions.iter().map(|p| p[s.min(NUM_FUTURE_STATS - 1)]).collect();
            col.sort_by(f64::total_cmp);
            let mut e: Vec<f64> = quantiles.iter().map(|&q| interpolated_quantile(&col, q)).collect();
            e.dedup_by(|a, b| *a <= *b);
            e
        })
        .collect();
    BinConfig::new(stats.to_vec(), edges)
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn encode_and_bin(encoder: &LinearEncoder, features: &[f64], bins: &BinConfig) -> Result<usize, FeatureError> {
    Ok(bins.id_of_prediction(&encoder.predict(features)?))
}

/// Fraction of samples that fall in the most common bin of their group.
pub fn aggregation_consistency(ids: &[usize], groups: &[usize]) -> f64 {
    use std::collections::HashMap;
    if ids.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for (&g, &id) in groups.iter().zip(ids) {
        *counts.entry((g, id)).or_default() += 1;
    }
    let mut best: HashMap<usize, usize> = HashMap::new();
    for (&(g, _), &c) in &counts {
        let b = best.entry(g).or_default();
        *b = (*b).max(c);
    }
    best.values().sum::<usize>() as f64 / ids.len() as f64
}

/// Encoder plus bins as persisted on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDocument {
    pub encoder: LinearEncoder,
    pub bins: BinConfig,
}

impl EncoderDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("encoder serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| FeatureError::Invalid(e.to_string()))?;
        doc.encoder.validate()?;
        doc.bins.validate()?;
        Ok(doc)
    }

    pub fn latent_id(&self, features: &[f64]) -> Result<usize, FeatureError> {
        encode_and_bin(&self.encoder, features, &self.bins)
    }
}

/// (features, targets) pairs for every decision step of one episode slice.
///
/// The current reference values are the mean mid and spread over the previous
/// decision interval; step `k` of the future is the window of snapshots it
/// covers. `future_window_steps` defaults to the rest of the episode.
pub fn encoder_samples(
    slice: &[LobSnapshot],
    meta: &DayMeta,
    config: &EpisodeConfig,
    future_window_steps: Option<usize>,
) -> Result<Vec<(Vec<f64>, FutureStats)>, FeatureError> {
    let sps = config.snapshots_per_step();
    let horizon = config.horizon_steps;
    if slice.len() < config.required_snapshots() {
        return Err(FeatureError::Invalid(format!(
            "slice has {} snapshots, need {}",
            slice.len(),
            config.required_snapshots()
        )));
    }
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let idx = t * sps;
        let features = context_features(slice, meta, idx, sps)?;
        let (cur_twap, cur_spread) = window_twap_spread(slice, idx.saturating_sub(sps), idx, meta);
        let w = future_window_steps.unwrap_or(horizon - t).clamp(1, horizon - t);
        let (twaps, spreads): (Vec<f64>, Vec<f64>) =
            (t..t + w).map(|k| window_twap_spread(slice, k * sps + 1, (k + 1) * sps, meta)).unzip();
        out.push((features, future_statistics(&twaps, &spreads, cur_twap, cur_spread)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_series_give_zero_stats() {
        let s = future_statistics(&[0.1; 7], &[0.3; 7], 0.1, 0.3).unwrap();
        assert_eq!(s.to_array(), [0.0; 8]);
    }

    #[test]
    fn shifted_twap() {
        let s = future_statistics(&[2.0, 2.0, 2.0], &[1.0], 1.0, 1.0).unwrap();
        assert_eq!(&s.to_array()[..4], &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn hand_computed_stats() {
        let s = future_statistics(&[1.0, 2.0, 3.0], &[1.0], 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.d_avg_twap, 0.0);
        assert_abs_diff_eq!(s.d_max_twap, 1.0);
        assert_abs_diff_eq!(s.d_min_twap, -1.0);
        assert_abs_diff_eq!(s.twap_vol, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(future_statistics(&[], &[1.0], 0.0, 0.0).is_err());
        assert!(future_statistics(&[1.0], &[], 0.0, 0.0).is_err());
    }

    #[test]
    fn rank_deficient_without_ridge() {
        let x = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let y = vec![[1.0; 8]; 3];
        let err = fit_linear_encoder(&x, &y, 0.0).unwrap_err();
        assert_eq!(err.to_string(), "rank deficient; increase lambda");
        assert!(fit_linear_encoder(&x, &y, 0.1).is_ok());
    }

    #[test]
    fn predict_checks_dimension() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let enc = fit_linear_encoder(&x, &[[1.0; 8], [2.0; 8]], 0.0).unwrap();
        assert!(matches!(enc.predict(&[1.0]), Err(FeatureError::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn standardized_fit_recovers_affine_map() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64, 5.0]).collect();
        let y: Vec<[f64; 8]> = x
            .iter()
            .map(|r| {
                let mut t = [0.0; 8];
                for (j, v) in t.iter_mut().enumerate() {
                    *v = 3.0 + j as f64 * r[0] - 0.5 * r[1];
                }
                t
            })
            .collect();
        let enc = fit_standardized_encoder(&x, &y, 0.0).unwrap();
        for (r, t) in x.iter().zip(&y) {
            let p = enc.predict(r).unwrap();
            for j in 0..8 {
                assert_abs_diff_eq!(p[j], t[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn lowest_cell_is_zero() {
        let bins = BinConfig::new(vec![0, 3], vec![vec![0.0, 1.0], vec![5.0]]).unwrap();
        assert_eq!(bins.id_of_prediction(&[-1.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(bins.num_ids(), 6);
    }

    #[test]
    fn edge_crossing_moves_by_stride() {
        let bins = BinConfig::new(vec![1, 2], vec![vec![0.0, 1.0], vec![-1.0, 2.0]]).unwrap();
        let mut p = [0.5; 8];
        let base = bins.id_of_prediction(&p);
        p[2] = 2.5;
        assert_eq!(bins.id_of_prediction(&p) - base, bins.strides()[1]);
    }

    #[test]
    fn unsorted_edges_rejected() {
        assert!(BinConfig::new(vec![0], vec![vec![1.0, 1.0]]).is_err());
        assert!(BinConfig::new(vec![9], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn quantile_edges() {
        let preds: Vec<[f64; 8]> = (0..=99).map(|i| [i as f64; 8]).collect();
        let bins = quantile_bins(&preds, &[0, 4], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(bins.num_ids(), 9);
        assert_abs_diff_eq!(bins.edges[0][0], 33.0, epsilon = 1e-9);
        let flat = quantile_bins(&vec![[1.0; 8]; 10], &[0], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(flat.edges[0], vec![1.0]);
    }

    #[test]
    fn encoder_document_roundtrip() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let enc = fit_standardized_encoder(&x, &[[1.0; 8], [2.0; 8], [4.0; 8]], 0.5).unwrap();
        let doc = EncoderDocument { encoder: enc, bins: BinConfig::new(vec![0], vec![vec![2.0]]).unwrap() };
        let back = EncoderDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back.latent_id(&[1.0, 1.0]).unwrap(), doc.latent_id(&[1.0, 1.0]).unwrap());
        assert!(EncoderDocument::from_json("{\"encoder\":1}").is_err());
    }

    #[test]
    fn consistency_fraction() {
        assert_abs_diff_eq!(aggregation_consistency(&[0, 0, 1, 2, 2, 2], &[0, 0, 0, 1, 1, 1]), 5.0 / 6.0);
    }

    proptest! {
        #[test]
        fn order_statistics_hold(
            twaps in proptest::collection::vec(-1e3f64..1e3, 1..40),
            spreads in proptest::collection::vec(0f64..10.0, 1..40),
            ct in -1e3f64..1e3,
            cs in 0f64..10.0,
        ) {
            let s = future_statistics(&twaps, &spreads, ct, cs).unwrap();
            prop_assert!(s.d_min_twap <= s.d_avg_twap && s.d_avg_twap <= s.d_max_twap);
            prop_assert!(s.d_min_sprd <= s.d_avg_sprd && s.d_avg_sprd <= s.d_max_sprd);
            prop_assert!(s.twap_vol >= 0.0 && s.sprd_vol >= 0.0);
        }

        #[test]
        fn mixed_radix_bijective(lens in proptest::collection::vec(0usize..4, 1..4)) {
            let edges: Vec<Vec<f64>> = lens.iter().map(|&l| (0..l).map(|k| k as f64).collect()).collect();
            let bins = BinConfig::new((0..lens.len()).collect(), edges).unwrap();
            for id in 0..bins.num_ids() {
                prop_assert_eq!(bins.id_of_cells(&bins.cells_of_id(id)), id);
            }
        }
    }
}
