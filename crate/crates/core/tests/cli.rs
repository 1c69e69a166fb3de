use std::fs;
use std::path::Path;
use std::process::Command;

use bell_ch::ch::{estimate_ch, ChMode};
use bell_ch::cli::{self, read_records_csv, RunManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bell-ch"))
}

fn run_in_process(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bell-ch").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.csv");
    let status = bin()
        .args(["simulate", "--paper-defaults", "--seed", "11", "--format", "csv", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("setting,counts,duration_s\n"));
    let records = read_records_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 6);

    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("records.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 11);
    assert_eq!(manifest.outputs.records, records);
    assert_eq!(manifest.config_hash.len(), 64);
    assert!(chrono::DateTime::parse_from_rfc3339(&manifest.timestamp).is_ok());

    let analyzed = bin().args(["analyze", "--format", "json"]).arg(&out).output().unwrap();
    assert!(analyzed.status.success());
    let v: serde_json::Value = serde_json::from_slice(&analyzed.stdout).unwrap();
    let expected = estimate_ch(&records, ChMode::CoincidenceSubstituted).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), expected.value);
    assert_eq!(v["significance"].as_f64().unwrap(), expected.significance);
}

#[test]
fn replay_reproduces_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let out_s = out.to_str().unwrap();
    let (code, _, err) = run_in_process(&["simulate", "--paper-defaults", "--format", "csv", "--out", out_s]);
    assert_eq!(code, 0, "{err}");
    let manifest = format!("{out_s}.manifest.json");
    let (code, replayed, _) = run_in_process(&["simulate", "--replay", &manifest, "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(replayed, fs::read_to_string(&out).unwrap());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", r#"{"state": {"f_re": 0.4, "phase": 1}}"#),
        ("syntax.json", r#"{"state": "#),
        ("range.json", r#"{"state": {"f_re": 1.5}}"#),
        ("eta.json", r#"{"detectors": {"eta1": 1.2}}"#),
    ];
    for (name, body) in cases {
        let path = write(dir.path(), name, body);
        let (code, _, err) = run_in_process(&["predict", "--config", &path]);
        assert_eq!(code, 2, "{name}: {err}");
        assert!(err.starts_with("error: config error"), "{name}: {err}");
    }
    let out = bin().args(["predict", "--config"]).arg(dir.path().join("unknown.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let (code, _, _) = run_in_process(&["predict"]);
    assert_eq!(code, 2);
    let (code, _, _) = run_in_process(&["predict", "--paper-defaults", "--format", "xml"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_setting_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "short.csv",
        "setting,counts,duration_s\nt1t2,300,1\nt1t2p,20,1\nt1pt2,120,1\nt1pt2p,149,1\nt1pinf,18,1\n",
    );
    let (code, _, err) = run_in_process(&["analyze", &path]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn analyze_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "counts.csv",
        "setting,counts,duration_s\nt1t2,300,1\nt1t2p,20,1\nt1pt2,120,1\nt1pt2p,149,1\nt1pinf,18,1\ninft2,18,1\n",
    );
    let (code, out, _) = run_in_process(&["analyze", &path, "--format", "csv"]);
    assert_eq!(code, 0);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0].parse::<f64>().unwrap(), 513.0);
    assert_eq!(row[1].parse::<f64>().unwrap(), 25.0);
}

#[test]
fn optimize_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bell.json", r#"{"state": {"f_re": 1.0}}"#);
    let (code, out, _) = run_in_process(&["optimize", "--config", &path]);
    assert_eq!(code, 0);
    assert!(out.contains("67.50 45.00 22.50 0.00"), "{out}");
    assert!(out.contains("critical efficiency: 0.8284"), "{out}");

    let path = write(dir.path(), "product.json", r#"{"state": {"f_re": 0.0}}"#);
    let (code, out, _) = run_in_process(&["optimize", "--config", &path]);
    assert_eq!(code, 0);
    assert!(out.starts_with("no violation"), "{out}");
}

#[test]
fn predict_and_threshold_formats() {
    let (code, out, _) = run_in_process(&["predict", "--paper-defaults", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["ch_exp"].as_f64().unwrap() - 513.0).abs() < 1e-6);
    assert_eq!(v["rates"]["settings"].as_array().unwrap().len(), 6);

    let (code, out, _) = run_in_process(&["predict", "--paper-defaults", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 7);

    let (code, out, _) = run_in_process(&["threshold", "--paper-defaults"]);
    assert_eq!(code, 0);
    assert!(out.contains("705.6256 s"), "{out}");
    assert!(out.contains("regime: DeviationExpected"));
}

#[test]
fn uncalibratable_pair_rate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "low.json", r#"{"state": {"f_re": 0.0}}"#);
    let (code, _, err) = run_in_process(&["predict", "--config", &path]);
    assert_eq!(code, 2);
    assert!(err.contains("protocol.pair_rate"), "{err}");
}

#[test]
fn event_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"protocol": {"pair_rate": 2000.0, "duration_s": 0.05}}"#);
    let events = dir.path().join("ev");
    let (code, _, err) = run_in_process(&["simulate", "--config", &cfg, "--events-dir", events.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(events.join("events_t1t2.csv")).unwrap();
    assert!(text.starts_with("channel,timestamp_s\n"));
    assert!(text.lines().count() > 10);
}
