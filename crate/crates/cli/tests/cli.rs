use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn faultloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultloc"))
        .args(args)
        .env("FAULTLOC_DATA_DIR", scratch().path())
        .output()
        .expect("spawn faultloc")
}

fn ok(args: &[&str]) -> String {
    let out = faultloc(args);
    assert!(
        out.status.success(),
        "faultloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scratch() -> &'static TempDir {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| TempDir::new().unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Desk dataset shared by every test in this file.
fn dataset() -> &'static Path {
    static DATA: OnceLock<PathBuf> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = scratch().path().join("desk");
        ok(&["generate", "--desk-scale", "--out", s(&dir)]);
        dir
    })
}

fn locator() -> &'static Path {
    static LOC: OnceLock<PathBuf> = OnceLock::new();
    LOC.get_or_init(|| {
        let dir = scratch().path().join("loc-multi");
        ok(&["--seed", "3", "train", "--dataset", s(dataset()), "--out", s(&dir)]);
        dir
    })
}

fn model_count(dir: &Path) -> usize {
    std::fs::read_dir(dir.join("models")).unwrap().count()
}

#[test]
fn dry_run_reports_record_counts() {
    let out = ok(&["generate", "--paper-scale", "--dry-run"]);
    assert!(out.contains("= 6384 records"), "{out}");
    let out = ok(&["generate", "--dry-run"]);
    assert!(out.contains("= 532 records"), "{out}");
    let out = ok(&["generate", "--paper-scale", "--robustness", "dataset1", "--dry-run"]);
    assert!(out.contains("= 532 records"), "{out}");
    let out = ok(&["generate", "--paper-scale", "--robustness", "dataset2", "--dry-run"]);
    assert!(out.contains("= 532 records"), "{out}");
}

#[test]
fn empty_impedance_list_is_a_usage_error() {
    let cfg = scratch().path().join("empty-z.toml");
    std::fs::write(
        &cfg,
        "[grid]\ndg_levels = [0.1]\nphase_sets = [\"a\"]\nimpedances = []\nangles = [90.0]\nspacing_m = 500.0\n",
    )
    .unwrap();
    let out = faultloc(&["--config", s(&cfg), "generate", "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("impedances"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg = scratch().path().join("typo.toml");
    std::fs::write(&cfg, "[gird]\nspacing_m = 500.0\n").unwrap();
    let out = faultloc(&["--config", s(&cfg), "generate", "--dry-run"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scale_flags_are_exclusive() {
    let out = faultloc(&["generate", "--desk-scale", "--paper-scale", "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_writes_manifest_and_records() {
    let dir = dataset();
    assert!(dir.join("manifest.json").exists());
    assert!(dir.join("run.json").exists());
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["records"].as_array().unwrap().len(), 532);
}

#[test]
fn existing_output_needs_force() {
    let out = faultloc(&["generate", "--out", s(dataset())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_writes_one_file_per_net_and_is_reproducible() {
    assert_eq!(model_count(locator()), 22);
    let again = scratch().path().join("loc-multi-again");
    ok(&["--seed", "3", "train", "--dataset", s(dataset()), "--out", s(&again)]);
    for entry in std::fs::read_dir(locator().join("models")).unwrap() {
        let entry = entry.unwrap();
        let a = std::fs::read(entry.path()).unwrap();
        let b = std::fs::read(again.join("models").join(entry.file_name())).unwrap();
        assert!(a == b, "{:?} differs between runs", entry.file_name());
    }
    assert_eq!(
        std::fs::read(locator().join("locator.json")).unwrap(),
        std::fs::read(again.join("locator.json")).unwrap()
    );
}

#[test]
fn single_mode_trains_three_nets() {
    let dir = scratch().path().join("loc-single");
    ok(&["train", "--mode", "single-ann", "--dataset", s(dataset()), "--out", s(&dir)]);
    assert_eq!(model_count(&dir), 3);
}

#[test]
fn evaluating_on_training_records_fails() {
    let out = faultloc(&[
        "evaluate",
        "--locator",
        s(locator()),
        "--dataset",
        s(dataset()),
        "--split",
        "all",
        "--out",
        s(&scratch().path().join("overlap")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
}

#[test]
fn predict_matches_batch_evaluation() {
    let report_dir = scratch().path().join("report");
    ok(&["evaluate", "--locator", s(locator()), "--dataset", s(dataset()), "--out", s(&report_dir)]);
    for f in ["report.json", "report.txt", "phase_confusion.csv", "path_confusion.csv"] {
        assert!(report_dir.join(f).exists(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 532 - 448);
    for r in records.iter().take(5) {
        let id = r["id"].as_str().unwrap();
        let file = dataset().join("records").join(format!("{id}.flwf"));
        let out = ok(&["predict", "--locator", s(locator()), "--json", s(&file)]);
        let p: Value = serde_json::from_str(&out).unwrap();
        let pred = &p["prediction"];
        assert_eq!(pred["fault_type"], r["predicted_type"]);
        assert_eq!(pred["path_id"], r["predicted_path"]);
        assert_eq!(pred["distance_m"].as_f64(), r["predicted_distance_m"].as_f64());
    }
}

#[test]
fn truncated_record_is_a_schema_error() {
    let src = std::fs::read_dir(dataset().join("records")).unwrap().next().unwrap().unwrap().path();
    let bytes = std::fs::read(&src).unwrap();
    let bad = scratch().path().join("truncated.flwf");
    std::fs::write(&bad, &bytes[..bytes.len() / 2]).unwrap();
    let out = faultloc(&["predict", "--locator", s(locator()), s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn missing_locator_is_a_data_error() {
    let out = faultloc(&["predict", "--locator", "/nonexistent/locator", "x.flwf"]);
    assert_eq!(out.status.code(), Some(4));
}
