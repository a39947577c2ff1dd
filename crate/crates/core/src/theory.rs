//! Tabular models with a latent context chain and a controlled state chain.
//!
//! The joint transition factorizes as `P(x', s' | x, s, a) = Px(x'|x) Ps(s'|x, s, a)`.
//! This module builds the three-group hard instance, estimates `Px` from
//! samples, plans by value iteration, and runs the Monte-Carlo experiments
//! on estimation error and on pooled return estimates.

use std::io::Write;

use ndarray::{Array2, Array3, Array4, Axis};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, SimRng};

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid hard instance: {0}")]
    InvalidInstance(String),
    #[error("no samples for latent {0}")]
    NoSamples(usize),
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrdcModel {
    /// `[x, x']`
    pub px: Array2<f64>,
    /// `[x, s, a, s']`
    pub ps: Array4<f64>,
    /// `[x, s, a]`
    pub r: Array3<f64>,
    pub gamma: f64,
}

impl OrdcModel {
    pub fn new(px: Array2<f64>, ps: Array4<f64>, r: Array3<f64>, gamma: f64) -> Result<Self, TheoryError> {
        let m = Self { px, ps, r, gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn num_latent(&self) -> usize {
        self.px.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.ps.dim().1
    }

    pub fn num_actions(&self) -> usize {
        self.ps.dim().2
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let bad = |m: String| Err(TheoryError::InvalidModel(m));
        let nx = self.px.nrows();
        if nx == 0 || self.px.ncols() != nx {
            return bad("latent transition matrix must be square and non-empty".into());
        }
        let (x, s, a, s2) = self.ps.dim();
        if x != nx || s == 0 || a == 0 || s2 != s {
            return bad(format!("state transition tensor has shape {:?}", self.ps.dim()));
        }
        if self.r.dim() != (nx, s, a) {
            return bad(format!("reward tensor has shape {:?}", self.r.dim()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)".into());
        }
        for (i, row) in self.px.outer_iter().enumerate() {
            check_row(row.iter().copied(), &format!("Px row {i}"))?;
        }
        for ((i, j, k), _) in self.r.indexed_iter() {
            check_row(self.ps.slice(ndarray::s![i, j, k, ..]).iter().copied(), &format!("Ps({i},{j},{k})"))?;
        }
        if self.r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("rewards must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn with_px(&self, px: Array2<f64>) -> Result<Self, TheoryError> {
        Self::new(px, self.ps.clone(), self.r.clone(), self.gamma)
    }

    pub fn q_max(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }
}

fn check_row(row: impl Iterator<Item = f64>, what: &str) -> Result<(), TheoryError> {
    let mut sum = 0.0;
    for v in row {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(TheoryError::InvalidModel(format!("{what} has a negative or non-finite entry")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(TheoryError::InvalidModel(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Three groups of `k` contexts: group 0 moves to group 1, group 1 stays with
/// probability `p_M` and otherwise moves to the absorbing group 2. Reward is 1
/// exactly in group 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardInstance {
    pub k: usize,
    pub p: f64,
    pub alpha: f64,
    /// `true` selects `p + alpha` for that chain.
    pub flags: Vec<bool>,
}

impl HardInstance {
    pub fn new(k: usize, p: f64, alpha: f64, flags: Vec<bool>) -> Result<Self, TheoryError> {
        let h = Self { k, p, alpha, flags };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.k == 0 {
            return Err(TheoryError::InvalidInstance("K must be at least 1".into()));
        }
        if self.flags.len() != self.k {
            return Err(TheoryError::InvalidInstance(format!("expected {} flags, got {}", self.k, self.flags.len())));
        }
        if !(0.0 < self.p && self.p < self.p + self.alpha && self.p + self.alpha < 1.0) {
            return Err(TheoryError::InvalidInstance("need 0 < p < p + alpha < 1".into()));
        }
        Ok(())
    }

    pub fn p_m(&self, chain: usize) -> f64 {
        if self.flags[chain] {
            self.p + self.alpha
        } else {
            self.p
        }
    }

    pub fn num_contexts(&self) -> usize {
        3 * self.k
    }

    pub fn start_context(&self, chain: usize) -> usize {
        chain
    }

    pub fn loop_context(&self, chain: usize) -> usize {
        self.k + chain
    }

    pub fn sink_context(&self, chain: usize) -> usize {
        2 * self.k + chain
    }

    /// Optimal value of a start context.
    pub fn closed_form_start_value(&self, chain: usize, gamma: f64) -> f64 {
        gamma / (1.0 - gamma * self.p_m(chain))
    }

    /// The instance as a model with one state and one action.
    pub fn build(&self, gamma: f64) -> Result<OrdcModel, TheoryError> {
        self.validate()?;
        let n = self.num_contexts();
        let mut px = Array2::zeros((n, n));
        let mut r = Array3::zeros((n, 1, 1));
        for c in 0..self.k {
            let pm = self.p_m(c);
            px[[self.start_context(c), self.loop_context(c)]] = 1.0;
            px[[self.loop_context(c), self.loop_context(c)]] = pm;
            px[[self.loop_context(c), self.sink_context(c)]] = 1.0 - pm;
            px[[self.sink_context(c), self.sink_context(c)]] = 1.0;
            r[[self.loop_context(c), 0, 0]] = 1.0;
        }
        OrdcModel::new(px, Array4::ones((n, 1, 1, 1)), r, gamma)
    }
}

pub fn build_hard_instance(k: usize, p: f64, alpha: f64, flags: &[bool], gamma: f64) -> Result<OrdcModel, TheoryError> {
    HardInstance::new(k, p, alpha, flags.to_vec())?.build(gamma)
}

/// Random model with Dirichlet(1) rows and uniform rewards.
pub fn random_model(nx: usize, ns: usize, na: usize, gamma: f64, rng: &mut SimRng) -> Result<OrdcModel, TheoryError> {
    let mut row = |len: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let mut px = Array2::zeros((nx, nx));
    for i in 0..nx {
        px.row_mut(i).assign(&ndarray::Array1::from(row(nx)));
    }
    let mut ps = Array4::zeros((nx, ns, na, ns));
    for x in 0..nx {
        for s in 0..ns {
            for a in 0..na {
                ps.slice_mut(ndarray::s![x, s, a, ..]).assign(&ndarray::Array1::from(row(ns)));
            }
        }
    }
    let r = Array3::from_shape_fn((nx, ns, na), |_| rng.random::<f64>());
    OrdcModel::new(px, ps, r, gamma)
}

/// Random stochastic matrix of the given size, rows Dirichlet(1).
pub fn random_stochastic(n: usize, rng: &mut SimRng) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((n, n), |_| -(1.0 - rng.random::<f64>()).ln());
    for mut row in m.outer_iter_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    m
}

/// Empirical `Px` from `(x, x')` pairs.
pub fn estimate_latent_transitions(samples: &[(usize, usize)], num_latent: usize) -> Result<Array2<f64>, TheoryError> {
    let mut counts = Array2::<u64>::zeros((num_latent, num_latent));
    for &(x, y) in samples {
        if x >= num_latent || y >= num_latent {
            return Err(TheoryError::InvalidArgument(format!("sample ({x}, {y}) outside {num_latent} latents")));
        }
        counts[[x, y]] += 1;
    }
    estimate_from_counts(&counts)
}

pub fn estimate_from_counts(counts: &Array2<u64>) -> Result<Array2<f64>, TheoryError> {
    let mut out = Array2::zeros(counts.dim());
    for (i, row) in counts.outer_iter().enumerate() {
        let total: u64 = row.sum();
        if total == 0 {
            return Err(TheoryError::NoSamples(i));
        }
        for (j, &c) in row.iter().enumerate() {
            out[[i, j]] = c as f64 / total as f64;
        }
    }
    Ok(out)
}

/// Multinomial counts of `n` draws from `probs`, via conditional binomials.
pub fn sample_multinomial(probs: &[f64], n: u64, rng: &mut SimRng) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// `n` generative-model transitions from every latent context.
pub fn sample_latent_counts(px: &Array2<f64>, n: u64, rng: &mut SimRng) -> Array2<u64> {
    let mut counts = Array2::zeros(px.dim());
    for (i, row) in px.outer_iter().enumerate() {
        let c = sample_multinomial(row.as_slice().expect("contiguous"), n, rng);
        counts.row_mut(i).assign(&ndarray::Array1::from(c));
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Pair {
    pub x: usize,
    pub s: usize,
    pub a: usize,
    pub joint: f64,
    pub latent: f64,
}

/// L1 distance between the true and plug-in joint transitions, next to the
/// L1 distance between the latent rows, for every `(x, s, a)`.
pub fn l1_factorization_check(
    px: &Array2<f64>,
    px_hat: &Array2<f64>,
    ps: &Array4<f64>,
) -> Result<Vec<L1Pair>, TheoryError> {
    let (nx, ns, na, ns2) = ps.dim();
    if px.dim() != (nx, nx) || px_hat.dim() != (nx, nx) || ns2 != ns {
        return Err(TheoryError::InvalidArgument("inconsistent shapes".into()));
    }
    let mut out = Vec::with_capacity(nx * ns * na);
    for x in 0..nx {
        let latent: f64 = (0..nx).map(|y| (px[[x, y]] - px_hat[[x, y]]).abs()).sum();
        for s in 0..ns {
            for a in 0..na {
                let mut joint = 0.0;
                for y in 0..nx {
                    for s2 in 0..ns {
                        let q = ps[[x, s, a, s2]];
                        joint += (px[[x, y]] * q - px_hat[[x, y]] * q).abs();
                    }
                }
                out.push(L1Pair { x, s, a, joint, latent });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    /// `[x, s, a]`
    pub q: Array3<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl QTable {
    pub fn values(&self) -> Array2<f64> {
        self.q.fold_axis(Axis(2), f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn greedy_policy(&self) -> Policy {
        let (nx, ns, na) = self.q.dim();
        let mut p = Vec::with_capacity(nx * ns);
        for x in 0..nx {
            for s in 0..ns {
                let mut best = 0;
                for a in 1..na {
                    if self.q[[x, s, a]] > self.q[[x, s, best]] {
                        best = a;
                    }
                }
                p.push(best);
            }
        }
        Policy::Deterministic(p)
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.q.iter().zip(other.q.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Action per joint state `x * |S| + s`.
    Deterministic(Vec<usize>),
    Uniform,
}

impl Policy {
    fn state_value(&self, q: &Array3<f64>, x: usize, s: usize) -> f64 {
        let ns = q.dim().1;
        match self {
            Policy::Deterministic(a) => q[[x, s, a[x * ns + s]]],
            Policy::Uniform => q.slice(ndarray::s![x, s, ..]).mean().unwrap(),
        }
    }

    pub fn action(&self, x: usize, s: usize, ns: usize, na: usize, rng: &mut SimRng) -> usize {
        match self {
            Policy::Deterministic(a) => a[x * ns + s],
            Policy::Uniform => rng.random_range(0..na),
        }
    }
}

/// One Bellman backup given the state values `v[x, s]`.
fn backup(model: &OrdcModel, v: &Array2<f64>) -> Array3<f64> {
    // w[x, s'] = sum_x' Px[x, x'] v[x', s']
    let w = model.px.dot(v);
    let (_, ns, na) = model.r.dim();
    let mut q = model.r.clone();
    for (x, mut qx) in q.axis_iter_mut(Axis(0)).enumerate() {
        for s in 0..ns {
            for a in 0..na {
                let mut acc = 0.0;
                for s2 in 0..ns {
                    acc += model.ps[[x, s, a, s2]] * w[[x, s2]];
                }
                qx[[s, a]] += model.gamma * acc;
            }
        }
    }
    q
}

fn iterate(
    model: &OrdcModel,
    tol: f64,
    max_iters: usize,
    value_of: impl Fn(&Array3<f64>) -> Array2<f64>,
) -> Result<QTable, TheoryError> {
    if !(tol > 0.0) {
        return Err(TheoryError::InvalidArgument("tol must be positive".into()));
    }
    let mut q = Array3::zeros(model.r.dim());
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let next = backup(model, &value_of(&q));
        residual = next.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if residual <= tol {
            let hi = model.q_max();
            q.mapv_inplace(|v| v.clamp(0.0, hi));
            return Ok(QTable { q, iterations: it, residual });
        }
    }
    Err(TheoryError::NotConverged { iterations: max_iters, residual })
}

/// Optimal Q by value iteration from zero. Stops once successive iterates are
/// within `tol`, which bounds the Bellman residual of the result by `gamma * tol`.
pub fn value_iteration(model: &OrdcModel, tol: f64, max_iters: usize) -> Result<QTable, TheoryError> {
    iterate(model, tol, max_iters, |q| q.fold_axis(Axis(2), f64::NEG_INFINITY, |m, &v| m.max(v)))
}

pub fn evaluate_policy(model: &OrdcModel, policy: &Policy, tol: f64, max_iters: usize) -> Result<QTable, TheoryError> {
    let (nx, ns, _) = model.r.dim();
    if let Policy::Deterministic(a) = policy {
        if a.len() != nx * ns || a.iter().any(|&v| v >= model.num_actions()) {
            return Err(TheoryError::InvalidArgument("policy does not match model".into()));
        }
    }
    iterate(model, tol, max_iters, |q| Array2::from_shape_fn((nx, ns), |(x, s)| policy.state_value(q, x, s)))
}

/// Sup-norm of `T Q - Q` for the optimality operator.
pub fn bellman_residual(model: &OrdcModel, q: &Array3<f64>) -> f64 {
    let v = q.fold_axis(Axis(2), f64::NEG_INFINITY, |m, &v| m.max(v));
    backup(model, &v).iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `gamma / (1 - gamma)^2 * sqrt(|X| ln(|X| / delta) / N)` without the constant.
pub fn bound_shape(num_latent: usize, gamma: f64, delta: f64, n: u64) -> f64 {
    let nx = num_latent as f64;
    gamma / (1.0 - gamma).powi(2) * (nx * (nx / delta).ln() / n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleComplexityConfig {
    pub n_grid: Vec<u64>,
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SampleComplexityConfig {
    fn default() -> Self {
        Self { n_grid: vec![100, 1_000, 10_000, 100_000], trials: 50, delta: 0.1, seed: 0, tol: 1e-10, max_iters: 100_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub n: u64,
    pub trial: usize,
    pub error: f64,
    pub bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: u64,
    pub mean_error: f64,
    pub bound: f64,
    pub fraction_within_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexityReport {
    pub constant: f64,
    pub slope: f64,
    pub trials: Vec<TrialError>,
    pub summary: Vec<GridSummary>,
}

impl SampleComplexityReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TheoryError> {
        writeln!(w, "N,trial,error,bound")?;
        for t in &self.trials {
            writeln!(w, "{},{},{},{}", t.n, t.trial, t.error, t.bound)?;
        }
        Ok(())
    }

    pub fn is_monotone(&self) -> bool {
        self.summary.windows(2).all(|w| w[1].mean_error <= w[0].mean_error)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Count-and-plan with a generative model: for each `N`, draw `N` transitions
/// from every latent, plan in the plug-in model, and record `||Q* - Q^*||_inf`.
///
/// The bound constant is the smallest `c` covering every trial at the
/// smallest `N`.
pub fn sample_complexity_experiment(
    model: &OrdcModel,
    config: &SampleComplexityConfig,
) -> Result<SampleComplexityReport, TheoryError> {
    if config.n_grid.is_empty() || config.trials == 0 || config.n_grid.contains(&0) {
        return Err(TheoryError::InvalidArgument("need a non-empty grid of positive N and at least one trial".into()));
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(TheoryError::InvalidArgument("delta must lie in (0, 1)".into()));
    }
    let q_star = value_iteration(model, config.tol, config.max_iters)?;
    let jobs: Vec<(usize, u64, usize)> = config
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| (0..config.trials).map(move |t| (g, n, t)))
        .collect();
    let errors: Vec<Result<f64, TheoryError>> = jobs
        .par_iter()
        .map(|&(g, n, t)| {
            let mut rng = stream(config.seed, "sample-complexity", (g * config.trials + t) as u64);
            let px_hat = estimate_from_counts(&sample_latent_counts(&model.px, n, &mut rng))?;
            let q_hat = value_iteration(&model.with_px(px_hat)?, config.tol, config.max_iters)?;
            Ok(q_star.sup_distance(&q_hat))
        })
        .collect();
    let errors: Vec<f64> = errors.into_iter().collect::<Result<_, _>>()?;

    let nx = model.num_latent();
    let n0 = config.n_grid[0];
    let first = &errors[..config.trials];
    let constant = first.iter().copied().fold(0.0, f64::max) / bound_shape(nx, model.gamma, config.delta, n0);
    let trials: Vec<TrialError> = jobs
        .iter()
        .zip(&errors)
        .map(|(&(_, n, t), &e)| TrialError {
            n,
            trial: t,
            error: e,
            bound: constant * bound_shape(nx, model.gamma, config.delta, n),
        })
        .collect();
    let summary: Vec<GridSummary> = trials
        .chunks(config.trials)
        .map(|c| GridSummary {
            n: c[0].n,
            mean_error: c.iter().map(|t| t.error).sum::<f64>() / c.len() as f64,
            bound: c[0].bound,
            fraction_within_bound: c.iter().filter(|t| t.error <= t.bound).count() as f64 / c.len() as f64,
        })
        .collect();
    let slope = log_log_slope(
        &summary.iter().map(|s| s.n as f64).collect::<Vec<_>>(),
        &summary.iter().map(|s| s.mean_error.max(f64::MIN_POSITIVE)).collect::<Vec<_>>(),
    );
    Ok(SampleComplexityReport { constant, slope, trials, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub mean: f64,
    pub variance: f64,
}

fn mean_var(xs: &[f64]) -> EstimatorStats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = if xs.len() > 1 { xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    EstimatorStats { mean, variance }
}

fn sample_index(probs: impl Iterator<Item = f64>, rng: &mut SimRng) -> usize {
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

/// Discounted return of one rollout of `horizon` steps from `(x, s, a)`.
pub fn rollout_return(
    model: &OrdcModel,
    policy: &Policy,
    start: (usize, usize, usize),
    horizon: usize,
    rng: &mut SimRng,
) -> f64 {
    let (ns, na) = (model.num_states(), model.num_actions());
    let (mut x, mut s, mut a) = start;
    let mut ret = 0.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        ret += disc * model.r[[x, s, a]];
        disc *= model.gamma;
        let nx = sample_index(model.px.row(x).iter().copied(), rng);
        let s2 = sample_index(model.ps.slice(ndarray::s![x, s, a, ..]).iter().copied(), rng);
        x = nx;
        s = s2;
        a = policy.action(x, s, ns, na, rng);
    }
    ret
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IllustrationReport {
    pub single: EstimatorStats,
    pub pooled: EstimatorStats,
    pub m: usize,
    pub trials: usize,
}

/// Per trial: the single-sequence estimate is one return `R_0`; the pooled
/// estimate averages `R_0..R_{M-1}` from sequences sharing the latent context.
#[allow(clippy::too_many_arguments)]
pub fn illustrative_estimators(
    model: &OrdcModel,
    policy: &Policy,
    start: (usize, usize, usize),
    m: usize,
    rollout_horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<IllustrationReport, TheoryError> {
    if m == 0 || trials == 0 {
        return Err(TheoryError::InvalidArgument("M and trials must be at least 1".into()));
    }
    let (x, s, a) = start;
    if x >= model.num_latent() || s >= model.num_states() || a >= model.num_actions() {
        return Err(TheoryError::InvalidArgument("start outside the model".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, "illustration", t as u64);
            let returns: Vec<f64> = (0..m).map(|_| rollout_return(model, policy, start, rollout_horizon, &mut rng)).collect();
            (returns[0], returns.iter().sum::<f64>() / m as f64)
        })
        .collect();
    let single: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let pooled: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(IllustrationReport { single: mean_var(&single), pooled: mean_var(&pooled), m, trials })
}
