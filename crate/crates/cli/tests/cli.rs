use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modetrain::io::{load_checkpoint, load_metrics};
use modetrain::training::{evaluate, TrainingData};

fn modetrain(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modetrain"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MODETRAIN_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> serde_json::Value {
    let out = modetrain(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null)
}

const CONFIG: &str = r#"
name = "sb"
replicates = 3
seed_base = 5
report = ["smoke"]

[dataset]
kind = "shifting_bar"
length = 5
bar = 2

[model]
n_visible = 5
n_hidden = 3

[train]
n_updates = 300
eval_every = 50
learning_rate = { kind = "constant", rate = 0.2 }
mode = { p_max = 0.3, alpha = 0.0667, beta = -6.0 }
"#;

#[test]
fn train_writes_bundle_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sb.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let summary = ok(&["train", "--config", "sb.toml", "--out", "a", "--jobs", "2"], dir.path());
    ok(&["train", "--config", "sb.toml", "--out", "b", "--jobs", "1"], dir.path());

    for r in 0..3 {
        let rel = format!("sb/replicate-{r:03}/metrics.jsonl");
        let a = fs::read(dir.path().join("a").join(&rel)).unwrap();
        let b = fs::read(dir.path().join("b").join(&rel)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "replicate {r} differs between runs");
    }
    assert_eq!(
        fs::read(dir.path().join("a/sb/summary.json")).unwrap(),
        fs::read(dir.path().join("b/sb/summary.json")).unwrap()
    );

    // The summary's best is recomputable from the raw streams.
    let mut best = f64::NEG_INFINITY;
    for r in 0..3 {
        let recs =
            load_metrics(&dir.path().join(format!("a/sb/replicate-{r:03}/metrics.jsonl"))).unwrap();
        assert_eq!(recs.first().unwrap().iter, 0);
        assert_eq!(recs.last().unwrap().iter, 300);
        assert_eq!(recs.len(), 7);
        for rec in &recs {
            assert_eq!(rec.seed, 5 + r);
            best = best.max(rec.log_likelihood.unwrap());
        }
    }
    assert_eq!(summary["best_log_likelihood"]["best"].as_f64().unwrap(), best);
    assert!(dir.path().join("a/sb/curves.csv").exists());
}

#[test]
fn zero_updates_bundle_holds_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("replicates = 3", "replicates = 1")
        .replace("n_updates = 300", "n_updates = 0");
    fs::write(dir.path().join("c.toml"), text).unwrap();
    ok(&["train", "--config", "c.toml", "--out", "o"], dir.path());
    let recs = load_metrics(&dir.path().join("o/sb/replicate-000/metrics.jsonl")).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].iter, 0);
    let rbm = load_checkpoint(&dir.path().join("o/sb/replicate-000/checkpoint.json")).unwrap();
    assert_eq!((rbm.n_visible(), rbm.n_hidden()), (5, 3));
}

#[test]
fn output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        CONFIG.replace("n_updates = 300", "n_updates = 10"),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_modetrain"))
        .args(["train", "--config", "c.toml"])
        .current_dir(dir.path())
        .env("MODETRAIN_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/sb/summary.json").exists());
}

#[test]
fn invalid_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), CONFIG.replace("replicates = 3", "replicates = 0"))
        .unwrap();
    let out = modetrain(&["train", "--config", "bad.toml", "--out", "o"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicates"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn eval_matches_library_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sb.toml"), CONFIG).unwrap();
    ok(&["train", "--config", "sb.toml", "--out", "o", "--replicates", "1"], dir.path());
    ok(
        &["make-data", "--kind", "shifting-bar", "--length", "5", "--bar", "2", "--out", "sb.json"],
        dir.path(),
    );
    let ck = "o/sb/replicate-000/checkpoint.json";
    let got = ok(&["eval", "--checkpoint", ck, "--data", "sb.json"], dir.path());
    let rbm = load_checkpoint(&dir.path().join(ck)).unwrap();
    let data = modetrain::datasets::shifting_bar(5, 2, false).unwrap();
    let want = evaluate(&rbm, TrainingData::Distribution(&data)).unwrap();
    assert_eq!(got["log_likelihood"].as_f64().unwrap(), want.log_likelihood);
    assert_eq!(got["kl"].as_f64().unwrap(), want.kl.unwrap());

    let recs = load_metrics(&dir.path().join("o/sb/replicate-000/metrics.jsonl")).unwrap();
    assert_eq!(recs.last().unwrap().log_likelihood.unwrap(), want.log_likelihood);
}

#[test]
fn ground_state_methods_agree_on_small_model() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sb.toml"), CONFIG).unwrap();
    ok(&["train", "--config", "sb.toml", "--out", "o", "--replicates", "1"], dir.path());
    let ck = "o/sb/replicate-000/checkpoint.json";
    let ex = ok(&["ground-state", "--checkpoint", ck], dir.path());
    let mem = ok(
        &[
            "ground-state", "--checkpoint", ck, "--method", "memcomputing",
            "--trajectory", "traj.csv", "--wcnf", "model.wcnf",
        ],
        dir.path(),
    );
    assert_eq!(ex["exact"], true);
    assert!((ex["energy"].as_f64().unwrap() - mem["energy"].as_f64().unwrap()).abs() < 1e-9);
    let traj = fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    assert!(traj.starts_with("time,dt,unsat_weight"));
    assert!(fs::read_to_string(dir.path().join("model.wcnf")).unwrap().contains("p wcnf"));
}

#[test]
fn diagnose_model_reports_exact_laws() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sb.toml"), CONFIG).unwrap();
    ok(&["train", "--config", "sb.toml", "--out", "o", "--replicates", "1"], dir.path());
    let report = ok(
        &[
            "diagnose", "model", "--checkpoint", "o/sb/replicate-000/checkpoint.json",
            "--out", "diag",
        ],
        dir.path(),
    );
    assert_eq!(report["ghost_units"], true);
    assert!(report["distance_law_max_error"].as_f64().unwrap() < 1e-10);
    assert!(report["energy_change"]["max_abs_error"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("diag/distance_profile.csv").exists());
    assert!(dir.path().join("diag/variance_scan.csv").exists());
}

#[test]
fn make_data_bars_and_stripes_masses() {
    let dir = tempfile::tempdir().unwrap();
    let out = modetrain(&["make-data", "--kind", "bars-and-stripes", "--side", "3"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let masses: Vec<f64> = v["masses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_f64().unwrap())
        .collect();
    assert_eq!(masses.len(), 14);
    let doubled = masses.iter().filter(|&&m| (m - 2.0 / 16.0).abs() < 1e-15).count();
    assert_eq!(doubled, 2);
}

#[test]
fn modal_subcommand_reports_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(&["diagnose", "modal", "--n", "3", "--seeds", "20"], dir.path());
    let eq = v["equal"].as_u64().unwrap();
    assert!(eq <= 20);
    assert_eq!(v["fraction"].as_f64().unwrap(), eq as f64 / 20.0);
}
