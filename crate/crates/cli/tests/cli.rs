use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ordc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("ORDC_EXEC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(&path, r#"{"seed": 3, "data": {"days": 4, "slices_per_day": 2}, "tabular": {"schedule": {"episodes": 50}}}"#)
        .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn lemma_check_writes_small_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let o = ordc(&["theory", "--check-lemma", "--trials", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("lemma_check.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trial,x,s,a,joint_l1,latent_l1,deviation");
    let mut trials = std::collections::BTreeSet::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        trials.insert(cols[0].to_string());
        assert!(cols[6].parse::<f64>().unwrap() <= 1e-12);
    }
    assert_eq!(trials.len(), 100);
    assert!(dir.path().join("run_config.json").exists());
    assert!(!dir.path().join("sample_complexity.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = ordc(&["theory", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = ordc(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"toy": {"train_sise": 10}}"#).unwrap();
    let o = ordc(&["--config", unknown.to_str().unwrap(), "toy"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"data": {"train_fraction": 1.5}}"#).unwrap();
    let o = ordc(&["--config", invalid.to_str().unwrap(), "backtest"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreadable_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let days = dir.path().join("days");
    fs::create_dir(&days).unwrap();
    for name in ["a.csv", "b.csv"] {
        fs::write(days.join(name), "not,a,lob\n").unwrap();
    }
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"data": {{"input_dir": {:?}}}}}"#, days.to_str().unwrap())).unwrap();
    let o = ordc(&["--config", cfg.to_str().unwrap(), "backtest"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn toy_report_has_both_learners() {
    let dir = tempfile::tempdir().unwrap();
    let o = ordc(&["toy", "--train-size", "1000", "--seeds", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("toy_report.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "agent,split,seed,mean,std,gap");
    for agent in ["aggregated", "memorizing"] {
        let rows = text.lines().filter(|l| l.starts_with(&format!("{agent},"))).count();
        assert_eq!(rows, 10, "{agent}");
    }
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_config.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["toy"]["train_size"], 1000);
    assert_eq!(record["derived_seeds"].as_object().unwrap().len(), 5);
}

#[test]
fn data_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let gen = dir.path().join("gen");
    assert_eq!(ordc(&["--config", &cfg, "gen-data"], &gen).status.code(), Some(0));
    assert_eq!(fs::read_dir(gen.join("days")).unwrap().count(), 8);

    let trained = dir.path().join("trained");
    let o = ordc(&["--config", &cfg, "train-tabular"], &trained);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    // the same days loaded from disk give the same backtest
    let from_disk = dir.path().join("disk.json");
    fs::write(
        &from_disk,
        format!(
            r#"{{"seed": 3, "data": {{"input_dir": {:?}, "slices_per_day": 2}}}}"#,
            gen.join("days").to_str().unwrap()
        ),
    )
    .unwrap();
    let agent = trained.join("agent.json");
    let replay = dir.path().join("replay");
    let o = ordc(&["--config", from_disk.to_str().unwrap(), "backtest", "--agent-file", agent.to_str().unwrap()], &replay);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(trained.join("backtest.csv")).unwrap(),
        fs::read_to_string(replay.join("backtest.csv")).unwrap()
    );

    let feats = dir.path().join("features");
    assert_eq!(ordc(&["--config", &cfg, "features"], &feats).status.code(), Some(0));
    let header = fs::read_to_string(feats.join("features.csv")).unwrap();
    assert!(header.starts_with("split,slice,step,latent_id,d_avg_twap"));
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert_eq!(ordc(&["--config", &cfg, "--seed", seed, "backtest", "--agent", "momentum"], &out).status.code(), Some(0));
        fs::read_to_string(out.join("backtest.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}
