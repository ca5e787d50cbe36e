use std::path::Path;
use std::process::{Command, Output};

fn sprinkle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sprinkle")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_one_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("syntax.json", "{\"kind\": \"simulate\", "),
        ("unknown.json", r#"{"kind": "simulate", "lambda": 1.0, "colour": "red"}"#),
        ("kind.json", r#"{"kind": "exitpoint"}"#),
        ("range.json", r#"{"kind": "simulate", "lambda": -1.0}"#),
    ] {
        let cfg = write(tmp.path(), name, text);
        let out = tmp.path().join(format!("out-{name}"));
        let o = sprinkle(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} left output behind");
    }
}

#[test]
fn resource_limits_are_checked_before_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "big.json",
        r#"{"kind": "simulate", "box": {"x0": 0, "x1": 10000, "t0": 0, "t1": 10000}}"#,
    );
    let out = tmp.path().join("out");
    let o = sprinkle(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("limit"));
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_one_and_help_exits_zero() {
    assert_eq!(sprinkle(&["simulate", "--seed", "minus-one"]).status.code(), Some(1));
    assert_eq!(sprinkle(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(sprinkle(&["--help"]).status.code(), Some(0));
    assert_eq!(sprinkle(&["schedule", "--reps", "3"]).status.code(), Some(1));
}

#[test]
fn walk_schedule_starts_at_ten_to_the_ten() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.json", r#"{"kind": "schedule", "schedule": "walk", "l0": "10000000000"}"#);
    let out = tmp.path().join("out");
    let o = sprinkle(&["schedule", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(out.join("schedule.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    let row0 = rd.records().next().unwrap().unwrap();
    let field = |name: &str| row0.get(headers.iter().position(|h| h == name).unwrap()).unwrap().to_string();
    assert_eq!(field("k"), "0");
    assert_eq!(field("big_l"), "10000000000");
    // l_0 = floor(L_0^{1/4})
    assert_eq!(field("l"), "316");
}

#[test]
fn same_config_and_seed_give_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.json", r#"{"kind": "exitpoint", "lambda": 1.3, "reps": 64, "seed": 5}"#);
    let mut hashes = vec![];
    for (run, workers) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(run);
        let o = sprinkle(&["exitpoint", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        hashes.push((std::fs::read(out.join("exitpoint.csv")).unwrap(), std::fs::read(out.join("exitpoint.json")).unwrap()));
    }
    assert_eq!(hashes[0], hashes[1]);
    let other = tmp.path().join("c");
    sprinkle(&["exitpoint", "--config", &cfg, "--seed", "6", "--out", other.to_str().unwrap()]);
    assert_ne!(std::fs::read(other.join("exitpoint.csv")).unwrap(), hashes[0].0);
}

#[test]
fn manifest_records_config_hash_seed_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.json", r#"{"kind": "detect", "reps": 40, "ranges": [0, 2]}"#);
    let out = tmp.path().join("out");
    let o = sprinkle(&["detect", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["command"], "detect");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["streams"][0]["reps"], 40);
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["detect.csv", "detect.json"]);
    let csv = std::fs::read_to_string(out.join("detect.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn poisson_bound_holds_on_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = sprinkle(&["poisson-bound", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("poisson.csv").exists() && out.join("chernoff.json").exists());
}
