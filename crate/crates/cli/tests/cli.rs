use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn panelcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panelcast")).args(args).output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr is empty");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

fn write_run_config(dir: &Path, csv: &Path, schema: &Path) -> std::path::PathBuf {
    let cfg = format!(
        r#"seed = 1
output_dir = "report"

[data]
csv = "{}"
schema = "{}"

[split]
val_start = "2021-07-24"
test_start = "2022-01-24"

[backtest]
stride = 28

[[models]]
kind = "naive"

[[models]]
kind = "ets"
max_history = 200
"#,
        csv.display(),
        schema.display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn synth_run_metrics_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth.toml");
    fs::write(&synth, "seed = 5\ngroup_ids = [\"a\", \"b\"]\nbase_levels = [500.0, 800.0]\n").unwrap();
    let csv = dir.path().join("panel.csv");
    let out = panelcast(&["synth", "--config", synth.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let schema = dir.path().join("panel.schema.toml");
    assert!(schema.is_file());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 2 * 1096);

    let cfg = write_run_config(dir.path(), &csv, &schema);
    let out = panelcast(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report");
    let metrics = fs::read_to_string(report.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    let out = panelcast(&[
        "metrics",
        "--forecasts",
        report.join("forecasts.csv").to_str().unwrap(),
        "--actuals",
        report.join("actuals.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), metrics);

    let out = panelcast(&[
        "metrics",
        "--weekly",
        "--forecasts",
        report.join("forecasts.csv").to_str().unwrap(),
        "--actuals",
        report.join("actuals.csv").to_str().unwrap(),
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), fs::read_to_string(report.join("weekly_mape.csv")).unwrap());

    let out = panelcast(&["report", "--in", report.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("naive7") && text.contains("ets"), "{text}");

    let out = panelcast(&["report", "--json", "--in", report.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["models"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_config_gives_error_json() {
    let out = panelcast(&["run", "--config", "/nonexistent/run.toml"]);
    assert!(!out.status.success());
    let v = error_json(&out);
    assert_eq!(v["error"]["kind"], "io");
    assert!(v["error"]["message"].as_str().unwrap().contains("/nonexistent/run.toml"));
}

#[test]
fn bad_arguments_give_usage_error_json() {
    let out = panelcast(&["metrics", "--forecasts", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
    let out = panelcast(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_values_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "output_dir = \"r\"\nmodels = []\n[data.synthetic]\n[split]\nval_start = \"2021-07-24\"\ntest_start = \"2022-01-24\"\n",
    )
    .unwrap();
    let out = panelcast(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "config");

    let out = panelcast(&["metrics", "--forecasts", cfg.to_str().unwrap(), "--actuals", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "load");
}

#[test]
fn help_exits_zero() {
    let out = panelcast(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("synth"));
}
