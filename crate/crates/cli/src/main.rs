//! `ordc`: synthetic data, execution backtests, the toy overfitting study and
//! the tabular theory experiments.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{ConfigError, TheoryTasks};
use config::{AgentKind, ExperimentConfig};

const THREADS_ENV: &str = "ORDC_EXEC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ordc", version, about = "Execution and contextual RL experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; omitted sections take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config; default `ordc_out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic LOB days and toy price paths.
    GenData {
        #[arg(long)]
        days: Option<usize>,
    },
    /// Backtest an agent over the train and eval splits.
    Backtest {
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
        /// Trained tabular agent JSON.
        #[arg(long)]
        agent_file: Option<PathBuf>,
    },
    /// Fit the encoder, train a tabular Q agent and backtest it.
    TrainTabular {
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Fit the context encoder and dump per-step statistics.
    Features,
    /// Aggregated vs memorizing agents on drifting Brownian paths.
    Toy {
        /// Total training paths per seed.
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        eval_size: Option<usize>,
        /// Number of seeds, 0..n, each derived from the root seed.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Hard instance, factorization check, sample complexity and estimator variance.
    /// With no task flag, every task runs.
    Theory {
        #[arg(long)]
        hard_instance: bool,
        #[arg(long)]
        check_lemma: bool,
        #[arg(long)]
        sample_complexity: bool,
        #[arg(long)]
        illustrate: bool,
        /// Trial count for the selected tasks.
        #[arg(long)]
        trials: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Backtest { .. } => "backtest",
            Command::TrainTabular { .. } => "train-tabular",
            Command::Features => "features",
            Command::Toy { .. } => "toy",
            Command::Theory { .. } => "theory",
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        match *self {
            Command::GenData { days } => {
                if let Some(d) = days {
                    cfg.data.days = d;
                }
            }
            Command::Backtest { agent, ref agent_file } => {
                if let Some(a) = agent {
                    cfg.backtest.agent = a;
                }
                if agent_file.is_some() {
                    cfg.backtest.agent_file.clone_from(agent_file);
                    cfg.backtest.agent = AgentKind::Tabular;
                }
            }
            Command::TrainTabular { episodes } => {
                if let Some(e) = episodes {
                    cfg.tabular.schedule.episodes = e;
                }
            }
            Command::Features => {}
            Command::Toy { train_size, eval_size, seeds } => {
                if let Some(n) = train_size {
                    cfg.toy.train_size = n;
                }
                if let Some(n) = eval_size {
                    cfg.toy.eval_size = n;
                }
                if let Some(n) = seeds {
                    cfg.toy.seeds = (0..n).collect();
                }
            }
            Command::Theory { trials, .. } => {
                if let Some(n) = trials {
                    cfg.theory.lemma.trials = n;
                    cfg.theory.sample_complexity.trials = n;
                    cfg.theory.illustration.trials = n;
                }
            }
        }
    }
}

fn load_config(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    command.apply(&mut cfg);
    commands::validate(&cfg)?;
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli, argv: &[String]) -> Result<()> {
    init_threads()?;
    let cfg = load_config(&cli.common, &cli.command)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("ordc_out"));
    std::fs::create_dir_all(&out).map_err(|e| ConfigError(format!("creating {}: {e}", out.display())))?;
    let mut seeds = BTreeMap::new();
    let result = match cli.command {
        Command::GenData { .. } => commands::gen_data(&cfg, &out, &mut seeds),
        Command::Backtest { .. } => commands::run_backtest(&cfg, &out, &mut seeds),
        Command::TrainTabular { .. } => commands::train_tabular(&cfg, &out, &mut seeds),
        Command::Features => commands::features(&cfg, &out, &mut seeds),
        Command::Toy { .. } => commands::toy(&cfg, &out, &mut seeds),
        Command::Theory { hard_instance, check_lemma, sample_complexity, illustrate, .. } => {
            let any = hard_instance || check_lemma || sample_complexity || illustrate;
            let tasks = TheoryTasks {
                hard_instance: hard_instance || !any,
                lemma: check_lemma || !any,
                sample_complexity: sample_complexity || !any,
                illustrate: illustrate || !any,
            };
            commands::theory(&cfg, &out, tasks, &mut seeds)
        }
    };
    commands::write_run_record(&out, argv, &cfg, &seeds)?;
    result?;
    eprintln!("{} outputs in {}", cli.command.name(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
