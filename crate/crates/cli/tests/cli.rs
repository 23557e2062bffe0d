use std::fs;
use std::process::{Command, Output};

fn gtbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtbandit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn budget_values() {
    let o = gtbandit(&["budget", "sufficient", "--m", "100", "--k", "3", "--delta", "0.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "159789");
    let o = gtbandit(&["budget", "practical", "--m", "1000"]);
    assert_eq!(stdout(&o).trim(), "244");
    let o = gtbandit(&["budget", "hoeffding", "--epsilon", "0.1", "--confidence", "0.05"]);
    assert_eq!(stdout(&o).trim(), "150");
}

#[test]
fn errors_are_json_on_stderr() {
    let o = gtbandit(&["budget", "practical", "--m", "1000", "--q-hat", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).expect("json on stderr");
    assert_eq!(err["error"], "domain");
    let o = gtbandit(&["run", "--preset", "fig9"]);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).expect("json on stderr");
    assert_eq!(err["error"], "usage");
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "experiment = \"fig2a\"\nhorizon = 0\n").unwrap();
    let o = gtbandit(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(serde_json::from_slice::<serde_json::Value>(&o.stderr).is_ok());
}

#[test]
fn small_run_writes_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = String::from_utf8(gtbandit(&["config", "fig2a-desk"]).stdout).unwrap().replace("m = 500", "m = 40");
    let path = dir.path().join("small.toml");
    fs::write(&path, cfg).unwrap();
    let out = dir.path().join("out");
    let o = gtbandit(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--replications",
        "2",
        "--horizon",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("gtqts-centered"));
    for f in [
        "meta.json",
        "summary/fig2a.csv",
        "summary/fig2a-totals.csv",
        "raw/fig2a-cts/0.csv",
        "raw/fig2a-gtqts/1.csv",
        "instances/0-mu.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn presets_and_gaps() {
    let o = gtbandit(&["presets"]);
    assert!(stdout(&o).lines().any(|l| l == "fig2c-desk"));
    let o = gtbandit(&["gaps", "--preset", "fig1-desk"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["delta_min"].as_f64().unwrap() >= 0.05 - 1e-12);
    assert_eq!(v["exact"], true);
}
