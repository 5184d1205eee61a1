use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dampspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A copy of a shipped config with one line replaced.
fn edited_config(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(config(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let path = dir.join(name);
    fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

fn simulate_and_recover(cfg: &str, dir: &Path) -> (PathBuf, PathBuf) {
    let meas = dir.join("meas");
    let bundle = dir.join("bundle");
    let out = dampspec(&["simulate", "--config", cfg, "--out", s(&meas)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = dampspec(&["recover", s(&meas), "--out", s(&bundle)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (meas, bundle)
}

#[test]
fn full_run_writes_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dampspec(&["full", "--config", &config("circle_train.toml"), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "measurements/manifest.toml",
        "measurements/train.csv",
        "recovered/bundle.toml",
        "recovered/index.csv",
        "recovered/diagnostics.csv",
        "direct/index.csv",
        "report/report.txt",
        "report/report.csv",
    ] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(tmp.path().join("report/report.txt")).unwrap();
    assert!(report.contains("verdict: equal"), "{report}");
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("circle_train.toml");
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = dampspec(&["simulate", "--config", &cfg, "--seed", "11", "--out", s(&dir)]);
        assert_eq!(code(&out), 0);
        dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["train.csv", "manifest.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn bundle_against_itself_is_equal_and_truncation_is_inconclusive() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, bundle) = simulate_and_recover(&config("circle_train.toml"), tmp.path());
    let out = dampspec(&["compare", s(&bundle), s(&bundle)]);
    assert_eq!(code(&out), 0);

    let short = tmp.path().join("short");
    fs::create_dir(&short).unwrap();
    for entry in fs::read_dir(&bundle).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, short.join(p.file_name().unwrap())).unwrap();
    }
    let index = fs::read_to_string(short.join("index.csv")).unwrap();
    let kept: Vec<&str> = index.lines().take(3).collect();
    fs::write(short.join("index.csv"), kept.join("\n") + "\n").unwrap();
    let report = tmp.path().join("report");
    let out = dampspec(&["compare", s(&bundle), s(&short), "--out", s(&report)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv.contains("beyond_budget") || csv.contains("missing"), "{csv}");
}

#[test]
fn scaled_metric_is_different() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, base) = simulate_and_recover(&config("circle_train.toml"), &tmp.path().join("base"));
    let scaled_cfg = edited_config(tmp.path(), "circle_train.toml", "modes = 9", "modes = 9\nconformal = 1.1");
    let (_, scaled) = simulate_and_recover(s(&scaled_cfg), &tmp.path().join("scaled"));
    let out = dampspec(&["compare", s(&base), s(&scaled)]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn probe_split_writes_packets() {
    let tmp = tempfile::tempdir().unwrap();
    let meas = tmp.path().join("meas");
    assert_eq!(code(&dampspec(&["simulate", "--config", &config("circle_train.toml"), "--out", s(&meas)])), 0);
    let split = tmp.path().join("split");
    let out = dampspec(&["probe-split", s(&meas), "--out", s(&split)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(split.join("packets.csv").is_file());
    assert!(split.join("packet_003.csv").is_file());
}

#[test]
fn missing_region_is_an_error_naming_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = edited_config(tmp.path(), "interval_dtn.toml", "s_in", "# s_in");
    let out = dampspec(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("s_in"), "{err}");
}

#[test]
fn malformed_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = edited_config(tmp.path(), "circle_train.toml", "cells = 64", "cells = \"many\"");
    let out = dampspec(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("circle_train.toml:"));
}

#[test]
fn corrupted_measurement_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let meas = tmp.path().join("meas");
    assert_eq!(code(&dampspec(&["simulate", "--config", &config("circle_train.toml"), "--out", s(&meas)])), 0);
    let path = meas.join("train.csv");
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[100].split(',').map(String::from).collect();
    fields[1] = "12345".into();
    lines[100] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = dampspec(&["recover", s(&meas), "--out", s(&tmp.path().join("b"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("checksum"));
}

#[test]
fn empty_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dampspec(&["recover", s(tmp.path()), "--out", s(&tmp.path().join("b"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn source_and_boundary_bundles_do_not_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, closed) = simulate_and_recover(&config("circle_train.toml"), &tmp.path().join("c"));
    let (_, open) = simulate_and_recover(&config("interval_dtn.toml"), &tmp.path().join("i"));
    assert_eq!(code(&dampspec(&["compare", s(&closed), s(&open)])), 2);
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(code(&dampspec(&[])), 2);
}
