//! End-to-end checks of the command-line interface: every subcommand runs
//! against a generated scenario, outputs land where promised, reruns are
//! byte-identical and the exit-code contract holds.

use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = r#"{
  "origin": {"code": "AAAA", "lat": 40.0, "lon": 0.0},
  "destination": {"code": "BBBB", "lat": 40.0, "lon": 12.0},
  "zones": [
    {"id": "ZN", "rings": [[{"lat": 40.5, "lon": -1.0}, {"lat": 40.5, "lon": 13.0}, {"lat": 46.0, "lon": 13.0}, {"lat": 46.0, "lon": -1.0}]], "unit_rates": {"1601": 60.0, "1602": 60.0, "1603": 60.0, "1604": 60.0}},
    {"id": "ZS", "rings": [[{"lat": 34.0, "lon": -1.0}, {"lat": 34.0, "lon": 13.0}, {"lat": 40.5, "lon": 13.0}, {"lat": 40.5, "lon": -1.0}]], "unit_rates": {"1601": 60.0, "1602": 60.0, "1603": 60.0, "1604": 60.0}}
  ],
  "corridors": [
    {"name": "south", "waypoints": [{"lat": 37.0, "lon": 4.0}, {"lat": 37.0, "lon": 8.0}], "congestion": 0.1},
    {"name": "north", "waypoints": [{"lat": 43.5, "lon": 4.0}, {"lat": 43.5, "lon": 8.0}], "congestion": 0.3}
  ],
  "airlines": [
    {"code": "AAA", "mtow_tonnes": 70.0, "cask_eur": 0.05, "weight": 2.0},
    {"code": "BBB", "mtow_tonnes": 120.0, "cask_eur": null, "weight": 1.0}
  ],
  "arrivals": [{"hour": 9.0, "sd": 0.5, "weight": 1.0}, {"hour": 21.0, "sd": 0.5, "weight": 1.0}],
  "noise": {"rate": 0.2, "lat_spread_deg": 6.0},
  "choice": {"mode": "fixed_shares", "shares": [0.65, 0.35]},
  "periods": [
    {"airac": "1601", "flights": 120},
    {"airac": "1602", "flights": 120},
    {"airac": "1603", "flights": 120},
    {"airac": "1604", "flights": 120}
  ]
}"#;

const CONFIG: &str = r#"{
  "origin": "AAAA",
  "destination": "BBBB",
  "training_airacs": ["1601", "1602"],
  "testing_airacs": ["1603", "1604"],
  "seed": 11,
  "clustering": {"min_clusters": 2, "max_dominance": 1.0}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_routecast"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let output = bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Generate a scenario and train a bundle under `dir`, returning nothing;
/// files land in data/ and model/.
fn prepare(dir: &Path) {
    std::fs::write(dir.join("spec.json"), SPEC).unwrap();
    std::fs::write(dir.join("pipeline.json"), CONFIG).unwrap();
    run_ok(
        &["synth", "--spec", "spec.json", "--seed", "404", "--out", "data"],
        dir,
    );
    run_ok(
        &[
            "train",
            "--flights",
            "data/flights.jsonl",
            "--zones",
            "data/zones.json",
            "--cask",
            "data/cask.csv",
            "--config",
            "pipeline.json",
            "--out",
            "model",
            "--threads",
            "2",
        ],
        dir,
    );
}

#[test]
fn full_command_flow_produces_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir);

    for name in ["flights.jsonl", "labels.csv", "cask.csv", "zones.json", "manifest.json"] {
        assert!(dir.join("data").join(name).is_file(), "missing data/{name}");
    }
    for name in ["bundle.json", "routes.csv", "segments.csv", "summary.txt", "manifest.json"] {
        assert!(dir.join("model").join(name).is_file(), "missing model/{name}");
    }

    run_ok(
        &[
            "cluster",
            "--flights",
            "data/flights.jsonl",
            "--zones",
            "data/zones.json",
            "--origin",
            "AAAA",
            "--destination",
            "BBBB",
            "--airacs",
            "1601,1602",
            "--out",
            "clusters",
        ],
        dir,
    );
    assert!(dir.join("clusters/clusters.json").is_file());
    assert!(dir.join("clusters/routes.csv").is_file());

    run_ok(
        &[
            "segment",
            "--flights",
            "data/flights.jsonl",
            "--cask",
            "data/cask.csv",
            "--origin",
            "AAAA",
            "--destination",
            "BBBB",
            "--airacs",
            "1601,1602",
            "--seed",
            "11",
            "--out",
            "segments",
        ],
        dir,
    );
    assert!(dir.join("segments/segmentation.json").is_file());
    assert!(dir.join("segments/segments.csv").is_file());

    let val = run_ok(
        &[
            "validate",
            "--bundle",
            "model/bundle.json",
            "--flights",
            "data/flights.jsonl",
            "--out",
            "val",
        ],
        dir,
    );
    assert!(String::from_utf8_lossy(&val.stdout).contains("validation:"));
    assert!(dir.join("val/validation.json").is_file());
    assert!(dir.join("val/eval.csv").is_file());

    let test = run_ok(
        &[
            "test",
            "--bundle",
            "model/bundle.json",
            "--flights",
            "data/flights.jsonl",
            "--out",
            "fc",
        ],
        dir,
    );
    assert!(String::from_utf8_lossy(&test.stdout).contains("route refresh on cycle 1603"));
    assert!(dir.join("fc/test.json").is_file());

    let charges = run_ok(
        &[
            "charges",
            "--flights",
            "data/flights.jsonl",
            "--zones",
            "data/zones.json",
            "--airac",
            "1601",
        ],
        dir,
    );
    let text = String::from_utf8_lossy(&charges.stdout);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "flight_id,airline,mtow_tonnes,weight_factor,total_km,charges_eur"
    );
    assert_eq!(lines.count(), 480, "one row per flight");
}

#[test]
fn reruns_are_byte_identical_outside_manifests() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    prepare(tmp_a.path());
    prepare(tmp_b.path());

    for rel in [
        "data/flights.jsonl",
        "data/labels.csv",
        "data/cask.csv",
        "data/zones.json",
        "model/bundle.json",
        "model/routes.csv",
        "model/segments.csv",
        "model/summary.txt",
    ] {
        let a = std::fs::read(tmp_a.path().join(rel)).unwrap();
        let b = std::fs::read(tmp_b.path().join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }
}

#[test]
fn usage_errors_exit_2_and_data_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let unknown_flag = bin()
        .args(["charges", "--bogus"])
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(unknown_flag.status.code(), Some(2));

    let no_subcommand = bin().current_dir(dir).output().unwrap();
    assert_eq!(no_subcommand.status.code(), Some(2));

    std::fs::write(dir.join("zones.json"), "[]").unwrap();
    let missing_input = bin()
        .args([
            "charges",
            "--flights",
            "absent.jsonl",
            "--zones",
            "zones.json",
            "--airac",
            "1601",
        ])
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(missing_input.status.code(), Some(1));
    assert!(!missing_input.stderr.is_empty(), "errors go to stderr");

    // a config naming a cycle twice is rejected before any fitting
    std::fs::write(dir.join("spec.json"), SPEC).unwrap();
    std::fs::write(
        dir.join("bad.json"),
        CONFIG.replace("\"1603\", \"1604\"", "\"1601\", \"1604\""),
    )
    .unwrap();
    let _ = bin()
        .args(["synth", "--spec", "spec.json", "--seed", "404", "--out", "data"])
        .current_dir(dir)
        .output()
        .unwrap();
    let dup = bin()
        .args([
            "train",
            "--flights",
            "data/flights.jsonl",
            "--zones",
            "data/zones.json",
            "--cask",
            "data/cask.csv",
            "--config",
            "bad.json",
            "--out",
            "model",
        ])
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(dup.status.code(), Some(1));
    assert!(!dir.join("model/bundle.json").exists(), "no partial outputs");
}
