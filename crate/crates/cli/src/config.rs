use std::path::PathBuf;

use ordc_core::agents::{BucketConfig, QLearningConfig};
use ordc_core::data::SyntheticDayConfig;
use ordc_core::env::EpisodeConfig;
use ordc_core::theory::SampleComplexityConfig;
use ordc_core::toy::ToyExperimentConfig;
use serde::{Deserialize, Serialize};

/// Everything a run needs. Missing sections take their defaults; unknown keys
/// are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed. Every component seed is derived from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub episode: EpisodeConfig,
    pub data: DataConfig,
    pub encoder: EncoderConfig,
    pub tabular: TabularConfig,
    pub backtest: BacktestConfig,
    pub toy: ToyExperimentConfig,
    pub theory: TheoryConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of `*.csv` day files with sibling metadata. Synthetic days
    /// are generated when absent.
    pub input_dir: Option<PathBuf>,
    pub days: usize,
    /// Template for generated days; its seed is replaced per day.
    pub day: SyntheticDayConfig,
    pub slices_per_day: usize,
    /// Leading fraction of days used for training.
    pub train_fraction: f64,
    /// Toy paths per price config written by `gen-data`.
    pub toy_paths_per_config: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            days: 20,
            day: SyntheticDayConfig::default(),
            slices_per_day: 4,
            train_fraction: 0.5,
            toy_paths_per_config: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub ridge_lambda: f64,
    /// Indices of the future statistics used for binning.
    pub bin_stats: Vec<usize>,
    pub quantiles: Vec<f64>,
    pub future_window_steps: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { ridge_lambda: 1e-3, bin_stats: vec![0, 3], quantiles: vec![1.0 / 3.0, 2.0 / 3.0], future_window_steps: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub buckets: BucketConfig,
    pub schedule: QLearningConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Twap,
    Momentum,
    Tabular,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub agent: AgentKind,
    /// Trained tabular agent; trained on the spot when absent.
    pub agent_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardInstanceSpec {
    pub k: usize,
    pub p: f64,
    pub alpha: f64,
    pub flags: Vec<bool>,
    pub gamma: f64,
}

impl Default for HardInstanceSpec {
    fn default() -> Self {
        Self { k: 4, p: 0.5, alpha: 0.2, flags: vec![false, true, false, true], gamma: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub trials: usize,
    /// Upper bound on each of |X|, |S|, |A| for the random models.
    pub max_dim: usize,
    pub gamma: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { trials: 100, max_dim: 6, gamma: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllustrationConfig {
    pub instance: HardInstanceSpec,
    pub m: usize,
    pub horizon: usize,
    pub trials: usize,
}

impl Default for IllustrationConfig {
    fn default() -> Self {
        Self {
            instance: HardInstanceSpec { k: 1, p: 0.5, alpha: 0.3, flags: vec![false], gamma: 0.9 },
            m: 20,
            horizon: 300,
            trials: 500,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub hard_instance: HardInstanceSpec,
    pub lemma: LemmaConfig,
    pub sample_complexity: SampleComplexityConfig,
    pub illustration: IllustrationConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_unknown_keys_fail() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 1}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"theory": {"lemma": {"trails": 3}}}"#).is_err());
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 9, "data": {"days": 3}}"#).unwrap();
        assert_eq!((partial.seed, partial.data.days, partial.data.slices_per_day), (9, 3, 4));
    }
}
