use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use ordc_core::agents::{backtest, tabular_q_learn, EpisodeSlice, MomentumPolicy, TabularQAgent, TwapPolicy};
use ordc_core::data::{generate_synthetic_day, load_snapshot_day, sample_slice_starts, write_snapshot_day, SyntheticDayConfig};
use ordc_core::env::ExecutionPolicy;
use ordc_core::features::{
    encoder_samples, fit_standardized_encoder, quantile_bins, EncoderDocument, FutureStats, FUTURE_STAT_NAMES,
    NUM_FUTURE_STATS,
};
use ordc_core::lob::{DayMeta, LobSnapshot};
use ordc_core::rng::{derive_seed, stream};
use ordc_core::theory::{
    illustrative_estimators, l1_factorization_check, random_model, random_stochastic, sample_complexity_experiment,
    value_iteration, HardInstance, Policy, SampleComplexityConfig,
};
use ordc_core::toy::{run_toy_experiment, write_toy_report, ToyDataset, ToyExperimentConfig};

use crate::config::{AgentKind, ExperimentConfig, HardInstanceSpec};

/// A problem with the user's configuration or arguments (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> anyhow::Error + '_ {
    move |e| ConfigError(format!("{what}: {e}")).into()
}

/// Check every section up front so bad values fail before any work starts.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.episode.validate().map_err(config_err("episode"))?;
    cfg.data.day.validate().map_err(config_err("data.day"))?;
    cfg.tabular.buckets.validate().map_err(config_err("tabular.buckets"))?;
    cfg.tabular.schedule.validate().map_err(config_err("tabular.schedule"))?;
    cfg.toy.cem.validate().map_err(config_err("toy.cem"))?;
    for c in &cfg.toy.configs {
        c.validate().map_err(config_err("toy.configs"))?;
    }
    let d = &cfg.data;
    let mut problems = Vec::new();
    if d.input_dir.is_none() && d.days < 2 {
        problems.push("data.days must be at least 2".to_string());
    }
    if d.slices_per_day == 0 {
        problems.push("data.slices_per_day must be positive".into());
    }
    if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
        problems.push("data.train_fraction must lie in (0, 1)".into());
    }
    let e = &cfg.encoder;
    if !(e.ridge_lambda >= 0.0 && e.ridge_lambda.is_finite()) {
        problems.push("encoder.ridge_lambda must be finite and non-negative".into());
    }
    if e.bin_stats.is_empty() || e.bin_stats.iter().any(|&s| s >= NUM_FUTURE_STATS) {
        problems.push(format!("encoder.bin_stats must be non-empty indices below {NUM_FUTURE_STATS}"));
    }
    if e.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        problems.push("encoder.quantiles must lie in [0, 1]".into());
    }
    if cfg.toy.seeds.is_empty() || cfg.toy.train_size == 0 || cfg.toy.eval_size == 0 {
        problems.push("toy needs seeds and positive split sizes".into());
    }
    let t = &cfg.theory;
    hard_instance(&t.hard_instance).map_err(config_err("theory.hard_instance"))?;
    hard_instance(&t.illustration.instance).map_err(config_err("theory.illustration.instance"))?;
    if t.lemma.trials == 0 || t.lemma.max_dim == 0 {
        problems.push("theory.lemma needs positive trials and max_dim".into());
    }
    if t.illustration.m == 0 || t.illustration.trials < 2 {
        problems.push("theory.illustration needs m >= 1 and trials >= 2".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ConfigError(problems.join("; ")).into())
    }
}

fn hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        bail!("gamma must lie in (0, 1)");
    }
    Ok(HardInstance::new(spec.k, spec.p, spec.alpha, spec.flags.clone())?)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reproducibility record written next to every output set.
pub fn write_run_record(out: &Path, command: &[String], cfg: &ExperimentConfig, seeds: &BTreeMap<String, u64>) -> Result<()> {
    let record = json!({
        "command": command,
        "root_seed": cfg.seed,
        "derived_seeds": seeds,
        "config": cfg,
    });
    write_json(&out.join("run_config.json"), &record)
}

type Day = (Vec<LobSnapshot>, DayMeta);
type Samples = Vec<Vec<(Vec<f64>, FutureStats)>>;

fn day_config(cfg: &ExperimentConfig, i: usize) -> SyntheticDayConfig {
    SyntheticDayConfig { seed: derive_seed(cfg.seed, "day", i as u64), ..cfg.data.day.clone() }
}

fn load_days(cfg: &ExperimentConfig, seeds: &mut BTreeMap<String, u64>) -> Result<Vec<Day>> {
    if let Some(dir) = &cfg.data.input_dir {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(config_err("data.input_dir"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        if files.len() < 2 {
            return Err(ConfigError(format!("{} holds fewer than two day files", dir.display())).into());
        }
        return files
            .par_iter()
            .map(|p| load_snapshot_day(p).with_context(|| format!("loading {}", p.display())))
            .collect();
    }
    let configs: Vec<SyntheticDayConfig> = (0..cfg.data.days).map(|i| day_config(cfg, i)).collect();
    for (i, c) in configs.iter().enumerate() {
        seeds.insert(format!("day_{i:03}"), c.seed);
    }
    Ok(configs.par_iter().map(generate_synthetic_day).collect::<Result<_, _>>()?)
}

/// Episode slices per day, with the leading days forming the training split.
fn split_slices<'a>(
    cfg: &ExperimentConfig,
    days: &'a [Day],
) -> Result<(Vec<EpisodeSlice<'a>>, Vec<EpisodeSlice<'a>>)> {
    let len = cfg.episode.required_snapshots();
    let n_train = ((days.len() as f64 * cfg.data.train_fraction).round() as usize).clamp(1, days.len() - 1);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, (snaps, meta)) in days.iter().enumerate() {
        if snaps.len() < len {
            bail!("day {i} has {} snapshots; an episode needs {len}", snaps.len());
        }
        let mut rng = stream(cfg.seed, "slices", i as u64);
        for start in sample_slice_starts(snaps.len(), len, cfg.data.slices_per_day, &mut rng) {
            let s = EpisodeSlice { snapshots: &snaps[start..start + len], meta: *meta };
            if i < n_train { train.push(s) } else { eval.push(s) }
        }
    }
    Ok((train, eval))
}

fn samples_of(cfg: &ExperimentConfig, slices: &[EpisodeSlice<'_>]) -> Result<Samples> {
    Ok(slices
        .par_iter()
        .map(|s| encoder_samples(s.snapshots, &s.meta, &cfg.episode, cfg.encoder.future_window_steps))
        .collect::<Result<_, _>>()?)
}

fn fit_encoder(cfg: &ExperimentConfig, train: &Samples) -> Result<EncoderDocument> {
    let (x, y): (Vec<Vec<f64>>, Vec<[f64; NUM_FUTURE_STATS]>) =
        train.iter().flatten().map(|(f, s)| (f.clone(), s.to_array())).unzip();
    let encoder = fit_standardized_encoder(&x, &y, cfg.encoder.ridge_lambda)?;
    let preds: Vec<_> = x.iter().map(|f| encoder.predict(f)).collect::<Result<_, _>>()?;
    let bins = quantile_bins(&preds, &cfg.encoder.bin_stats, &cfg.encoder.quantiles)?;
    Ok(EncoderDocument { encoder, bins })
}

pub fn gen_data(cfg: &ExperimentConfig, out: &Path, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let days = load_days(&ExperimentConfig { data: crate::config::DataConfig { input_dir: None, ..cfg.data.clone() }, ..cfg.clone() }, seeds)?;
    let dir = out.join("days");
    fs::create_dir_all(&dir)?;
    for (i, (snaps, meta)) in days.iter().enumerate() {
        write_snapshot_day(&dir.join(format!("day_{i:03}.csv")), snaps, meta)?;
    }
    let toy_seed = derive_seed(cfg.seed, "toy-paths", 0);
    seeds.insert("toy_paths".into(), toy_seed);
    let n = cfg.data.toy_paths_per_config;
    let toy = ToyDataset::generate(&cfg.toy.configs, n, n, toy_seed, cfg.toy.anchor)?;
    let mut w = create(&out.join("toy_paths.csv"))?;
    toy.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("wrote {} days to {} and {} toy paths", days.len(), dir.display(), toy.train.len() + toy.eval.len());
    Ok(())
}

pub fn features(cfg: &ExperimentConfig, out: &Path, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let days = load_days(cfg, seeds)?;
    let (train, eval) = split_slices(cfg, &days)?;
    let train_samples = samples_of(cfg, &train)?;
    let eval_samples = samples_of(cfg, &eval)?;
    let doc = fit_encoder(cfg, &train_samples)?;
    fs::write(out.join("encoder.json"), doc.to_json())?;

    let mut w = create(&out.join("features.csv"))?;
    let mut header = vec!["split".to_string(), "slice".into(), "step".into(), "latent_id".into()];
    header.extend(FUTURE_STAT_NAMES.iter().map(|n| n.to_string()));
    header.extend(FUTURE_STAT_NAMES.iter().map(|n| format!("pred_{n}")));
    writeln!(w, "{}", header.join(","))?;
    let mut summary = serde_json::Map::new();
    for (split, samples) in [("train", &train_samples), ("eval", &eval_samples)] {
        let mut sq = [0.0; NUM_FUTURE_STATS];
        let mut count = 0usize;
        let mut occupancy = vec![0usize; doc.bins.num_ids()];
        for (slice, rows) in samples.iter().enumerate() {
            for (step, (f, stats)) in rows.iter().enumerate() {
                let pred = doc.encoder.predict(f)?;
                let id = doc.bins.id_of_prediction(&pred);
                occupancy[id] += 1;
                count += 1;
                let truth = stats.to_array();
                let mut line = format!("{split},{slice},{step},{id}");
                for v in truth.iter().chain(pred.iter()) {
                    line.push_str(&format!(",{v}"));
                }
                writeln!(w, "{line}")?;
                for k in 0..NUM_FUTURE_STATS {
                    sq[k] += (pred[k] - truth[k]).powi(2);
                }
            }
        }
        let mse: BTreeMap<&str, f64> =
            FUTURE_STAT_NAMES.iter().zip(sq).map(|(n, s)| (*n, s / count.max(1) as f64)).collect();
        summary.insert(split.into(), json!({ "samples": count, "mse": mse, "latent_occupancy": occupancy }));
    }
    w.flush()?;
    summary.insert("num_latent_ids".into(), json!(doc.bins.num_ids()));
    write_json(&out.join("features_summary.json"), &summary)?;
    eprintln!("encoder fitted on {} slices; {} latent ids", train.len(), doc.bins.num_ids());
    Ok(())
}

fn train_agent(
    cfg: &ExperimentConfig,
    train: &[EpisodeSlice<'_>],
    seeds: &mut BTreeMap<String, u64>,
) -> Result<TabularQAgent> {
    let doc = fit_encoder(cfg, &samples_of(cfg, train)?)?;
    let seed = derive_seed(cfg.seed, "q-learning", 0);
    seeds.insert("q_learning".into(), seed);
    let schedule = ordc_core::agents::QLearningConfig { seed, ..cfg.tabular.schedule.clone() };
    Ok(tabular_q_learn(train, &doc, cfg.tabular.buckets, &cfg.episode, &schedule)?)
}

fn write_backtest(out: &Path, policy: &dyn ExecutionPolicy, train: &[EpisodeSlice<'_>], eval: &[EpisodeSlice<'_>], cfg: &ExperimentConfig) -> Result<()> {
    let report = backtest(policy, train, eval, &cfg.episode)?;
    let mut w = create(&out.join("backtest.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    fs::write(out.join("backtest_summary.json"), report.summary_json())?;
    eprintln!(
        "train {:.3} bp, eval {:.3} bp, gap {:.3} bp",
        report.train.mean_cost_bp, report.eval.mean_cost_bp, report.gap_bp
    );
    Ok(())
}

pub fn train_tabular(cfg: &ExperimentConfig, out: &Path, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let days = load_days(cfg, seeds)?;
    let (train, eval) = split_slices(cfg, &days)?;
    let agent = train_agent(cfg, &train, seeds)?;
    write_json(&out.join("agent.json"), &agent)?;
    write_backtest(out, &agent, &train, &eval, cfg)
}

pub fn run_backtest(cfg: &ExperimentConfig, out: &Path, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let days = load_days(cfg, seeds)?;
    let (train, eval) = split_slices(cfg, &days)?;
    match cfg.backtest.agent {
        AgentKind::Twap => write_backtest(out, &TwapPolicy { config: cfg.episode.clone() }, &train, &eval, cfg),
        AgentKind::Momentum => write_backtest(out, &MomentumPolicy { config: cfg.episode.clone() }, &train, &eval, cfg),
        AgentKind::Tabular => {
            let agent: TabularQAgent = match &cfg.backtest.agent_file {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(config_err("backtest.agent_file"))?;
                    serde_json::from_str(&text).map_err(config_err("backtest.agent_file"))?
                }
                None => train_agent(cfg, &train, seeds)?,
            };
            write_backtest(out, &agent, &train, &eval, cfg)
        }
    }
}

pub fn toy(cfg: &ExperimentConfig, out: &Path, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let derived: Vec<u64> = cfg.toy.seeds.iter().map(|&s| derive_seed(cfg.seed, "toy", s)).collect();
    for (s, d) in cfg.toy.seeds.iter().zip(&derived) {
        seeds.insert(format!("toy_{s}"), *d);
    }
    let rows = run_toy_experiment(&ToyExperimentConfig { seeds: derived, ..cfg.toy.clone() })?;
    let mut w = create(&out.join("toy_report.csv"))?;
    write_toy_report(&rows, &mut w)?;
    w.flush()?;
    let mut summary = serde_json::Map::new();
    for agent in ["uniform", "aggregated", "memorizing"] {
        let mine: Vec<_> = rows.iter().filter(|r| r.agent == agent).collect();
        let n = mine.len() as f64;
        let mean = |f: fn(&ordc_core::toy::GapReport) -> f64| mine.iter().map(|r| f(&r.report)).sum::<f64>() / n;
        let (tr, ev, gap) = (mean(|g| g.train_mean), mean(|g| g.eval_mean), mean(|g| g.gap));
        eprintln!("{agent:>10}: train {tr:.4} eval {ev:.4} gap {gap:.4}");
        summary.insert(agent.into(), json!({ "train_mean": tr, "eval_mean": ev, "gap": gap }));
    }
    write_json(&out.join("toy_summary.json"), &summary)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TheoryTasks {
    pub hard_instance: bool,
    pub lemma: bool,
    pub sample_complexity: bool,
    pub illustrate: bool,
}

pub fn theory(cfg: &ExperimentConfig, out: &Path, tasks: TheoryTasks, seeds: &mut BTreeMap<String, u64>) -> Result<()> {
    let t = &cfg.theory;
    let mut summary = serde_json::Map::new();

    if tasks.hard_instance {
        let spec = &t.hard_instance;
        let inst = hard_instance(spec)?;
        let q = value_iteration(&inst.build(spec.gamma)?, 1e-12, 1_000_000)?;
        let mut w = create(&out.join("hard_instance.csv"))?;
        writeln!(w, "chain,flag,p_m,value,closed_form")?;
        let mut worst: f64 = 0.0;
        for chain in 0..spec.k {
            let v = q.q[[inst.start_context(chain), 0, 0]];
            let exact = inst.closed_form_start_value(chain, spec.gamma);
            worst = worst.max((v - exact).abs());
            writeln!(w, "{chain},{},{},{v},{exact}", spec.flags[chain], inst.p_m(chain))?;
        }
        w.flush()?;
        summary.insert("hard_instance_max_deviation".into(), json!(worst));
    }

    if tasks.lemma {
        let l = &t.lemma;
        let mut w = create(&out.join("lemma_check.csv"))?;
        writeln!(w, "trial,x,s,a,joint_l1,latent_l1,deviation")?;
        let mut worst: f64 = 0.0;
        for trial in 0..l.trials {
            let mut rng = stream(cfg.seed, "lemma", trial as u64);
            let nx = rng.random_range(1..=l.max_dim);
            let ns = rng.random_range(1..=l.max_dim);
            let na = rng.random_range(1..=l.max_dim);
            let model = random_model(nx, ns, na, l.gamma, &mut rng)?;
            let px_hat = random_stochastic(nx, &mut rng);
            for r in l1_factorization_check(&model.px, &px_hat, &model.ps)? {
                let dev = (r.joint - r.latent).abs();
                worst = worst.max(dev);
                writeln!(w, "{trial},{},{},{},{},{},{dev}", r.x, r.s, r.a, r.joint, r.latent)?;
            }
        }
        w.flush()?;
        eprintln!("lemma check: {} models, max deviation {worst:.3e}", l.trials);
        summary.insert("lemma_max_deviation".into(), json!(worst));
    }

    if tasks.sample_complexity {
        let spec = &t.hard_instance;
        let model = hard_instance(spec)?.build(spec.gamma)?;
        let seed = derive_seed(cfg.seed, "sample-complexity", 0);
        seeds.insert("sample_complexity".into(), seed);
        let sc = SampleComplexityConfig { seed, ..t.sample_complexity.clone() };
        let report = sample_complexity_experiment(&model, &sc)?;
        let mut w = create(&out.join("sample_complexity.csv"))?;
        report.write_csv(&mut w)?;
        w.flush()?;
        eprintln!("sample complexity: slope {:.3}, c {:.4}", report.slope, report.constant);
        summary.insert(
            "sample_complexity".into(),
            json!({ "constant": report.constant, "slope": report.slope, "monotone": report.is_monotone(), "summary": report.summary }),
        );
    }

    if tasks.illustrate {
        let il = &t.illustration;
        let model = hard_instance(&il.instance)?.build(il.instance.gamma)?;
        let seed = derive_seed(cfg.seed, "illustration", 0);
        seeds.insert("illustration".into(), seed);
        let rep = illustrative_estimators(&model, &Policy::Uniform, (0, 0, 0), il.m, il.horizon, il.trials, seed)?;
        eprintln!(
            "single-sequence variance {:.4}, pooled variance {:.5}, ratio {:.4}",
            rep.single.variance,
            rep.pooled.variance,
            rep.pooled.variance / rep.single.variance
        );
        write_json(&out.join("illustration.json"), &rep)?;
    }

    write_json(&out.join("theory_summary.json"), &summary)
}
