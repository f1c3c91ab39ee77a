use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn uq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uq"))
        .current_dir(dir)
        .env_remove("UQ_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn err_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error")
}

/// Zero-bias one-dimensional system: experiments, runs, inputs and a fitted model.
fn pipeline(dir: &Path, seed: &str) {
    ok_json(&uq(
        dir,
        &[
            "--seed", seed, "--out-dir", "o", "synth", "--n", "20", "--sims", "60",
            "--extra-count", "0", "--inputs-count", "50000", "--alpha", "0.95",
        ],
    ));
    ok_json(&uq(dir, &["--out-dir", "o", "fit-surrogate", "--sim", "o/simulation.csv"]));
}

#[test]
fn quantile_matches_synthetic_oracle() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path(), "11");
    let synth: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/synth.json")).unwrap()).unwrap();
    let truth = synth["results"]["true_quantile"].as_f64().unwrap();
    let r = ok_json(&uq(
        tmp.path(),
        &["--out-dir", "o", "quantile", "--model", "o/model.json", "--inputs", "o/inputs.csv"],
    ));
    let q = r["results"]["value"].as_f64().unwrap();
    // Plug-in error at N = 5·10⁴ is about 2e-4 in these units.
    assert!((q - truth).abs() < 5e-4, "{q} vs {truth}");
    assert_eq!(r["results"]["sample_size"], 50_000);
    assert_eq!(r["rng_contract"], "chacha20-stream-v1");
}

#[test]
fn missing_file_names_path() {
    let tmp = TempDir::new().unwrap();
    let out = uq(
        tmp.path(),
        &["--out-dir", "o", "quantile", "--model", "absent-model.json", "--inputs", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let e = err_json(&out);
    assert_eq!(e["error"]["kind"], "io");
    assert_eq!(e["error"]["path"], "absent-model.json");
    assert!(e["error"]["message"].as_str().unwrap().contains("absent-model.json"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = uq(tmp.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_json(&out)["error"]["kind"], "usage");
}

#[test]
fn same_seed_same_payload() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str| {
        let a = ok_json(&uq(
            tmp.path(),
            &["--seed", "5", "--out-dir", dir, "synth", "--bias", "linear", "--n", "15", "--sims", "40",
              "--extra-count", "0", "--inputs-count", "2000"],
        ));
        let exp = format!("{dir}/experiment.csv");
        let sim = format!("{dir}/simulation.csv");
        ok_json(&uq(tmp.path(), &["--out-dir", dir, "fit-surrogate", "--sim", &sim]));
        let model = format!("{dir}/model.json");
        let b = ok_json(&uq(
            tmp.path(),
            &["--seed", "9", "--out-dir", dir, "bootstrap-error", "--exp", &exp, "--model", &model, "--reps", "30"],
        ));
        let csv = std::fs::read_to_string(tmp.path().join(&exp)).unwrap();
        (a["results"].clone(), b["results"].clone(), b["settings"]["bootstrap"].clone(), csv)
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first.0.to_string(), second.0.to_string());
    assert_eq!(first.1.to_string(), second.1.to_string());
    assert_eq!(first.2.to_string(), second.2.to_string());
    assert_eq!(first.3, second.3);
}

#[test]
fn dry_run_computes_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let r = ok_json(&uq(
        tmp.path(),
        &["--dry-run", "--out-dir", "o", "synth", "--n", "5", "--sims", "10", "--inputs-count", "10"],
    ));
    assert_eq!(r["dry_run"], true);
    assert!(r["results"].is_null());
    assert!(r["artifacts"].as_array().unwrap().is_empty());
    assert!(!tmp.path().join("o").exists());
    // Missing inputs are still reported.
    let e = err_json(&uq(tmp.path(), &["--dry-run", "avm", "--exp", "e.csv", "--sim", "s.csv"]));
    assert_eq!(e["error"]["path"], "e.csv");
}

#[test]
fn outputs_stay_inside_out_dir() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path(), "3");
    for bad in ["../escape.csv", "/tmp/escape.csv", "a/../../escape.csv"] {
        let e = err_json(&uq(
            tmp.path(),
            &["--out-dir", "o", "density", "--model", "o/model.json", "--inputs", "o/inputs.csv", "--out", bad],
        ));
        assert_eq!(e["error"]["kind"], "config", "{bad}");
    }
    let e = err_json(&uq(
        tmp.path(),
        &["--out-dir", "o", "--report", "../r.json", "quantile", "--model", "o/model.json", "--inputs", "o/inputs.csv"],
    ));
    assert_eq!(e["error"]["kind"], "config");
    assert!(!tmp.path().join("escape.csv").exists());
    assert!(!tmp.path().join("r.json").exists());

    let r = ok_json(&uq(
        tmp.path(),
        &["--out-dir", "o", "density", "--model", "o/model.json", "--inputs", "o/inputs.csv", "--out", "sub/d.csv"],
    ));
    assert_eq!(r["artifacts"], serde_json::json!(["sub/d.csv", "density.json"]));
    let text = std::fs::read_to_string(tmp.path().join("o/sub/d.csv")).unwrap();
    assert!(text.starts_with("y,density\n"));
}

#[test]
fn config_supplies_seed_and_flags() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("run.json"),
        r#"{"seed": 42, "l_n": 30, "synth": {"n": 7, "bias": "smooth", "extra_count": 0, "inputs_count": 0}}"#,
    )
    .unwrap();
    let r = ok_json(&uq(tmp.path(), &["--config", "run.json", "--out-dir", "o", "synth", "--n", "9"]));
    assert_eq!(r["seed"], 42);
    assert_eq!(r["settings"]["sims"], 30);
    // Command-line flags win over the config block.
    assert_eq!(r["settings"]["args"]["n"], 9);
    assert_eq!(r["settings"]["args"]["bias"], "smooth");
    let lines = std::fs::read_to_string(tmp.path().join("o/experiment.csv")).unwrap().lines().count();
    assert_eq!(lines, 10);

    std::fs::write(
        tmp.path().join("bad.json"),
        r#"{"l_n": 0, "synth": {"bogus": 1, "n": 3, "other": true}}"#,
    )
    .unwrap();
    let e = err_json(&uq(tmp.path(), &["--config", "bad.json", "synth"]));
    assert_eq!(e["error"]["kind"], "config");
    let e = err_json(&uq(
        tmp.path(),
        &["--config", "bad.json", "--dry-run", "synth"],
    ));
    assert!(!e["error"]["problems"].as_array().unwrap().is_empty());

    std::fs::write(tmp.path().join("bad2.json"), r#"{"synth": {"bogus": 1, "other": true}}"#).unwrap();
    let e = err_json(&uq(tmp.path(), &["--config", "bad2.json", "synth"]));
    assert_eq!(e["error"]["problems"].as_array().unwrap().len(), 2);
}

#[test]
fn infeasible_interval_reports_minimal_delta() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path(), "4");
    let e = err_json(&uq(
        tmp.path(),
        &["--out-dir", "o", "ci-quantile", "--exp", "o/experiment.csv", "--model", "o/model.json",
          "--inputs", "o/inputs.csv", "--delta", "0.05"],
    ));
    assert_eq!(e["error"]["kind"], "infeasible");
    let d = e["error"]["minimal_delta"].as_f64().unwrap();
    assert!(d > 0.05 && d < 1.0);
}

#[test]
fn report_file_round_trips() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path(), "8");
    let printed = ok_json(&uq(
        tmp.path(),
        &["--out-dir", "o", "quantile", "--model", "o/model.json", "--inputs", "o/inputs.csv", "--alpha", "0.5"],
    ));
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/quantile.json")).unwrap()).unwrap();
    assert_eq!(printed, saved);
    assert_eq!(saved["results"]["alpha"], 0.5);
}
