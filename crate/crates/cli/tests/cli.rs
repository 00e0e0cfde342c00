use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tlssc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlssc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tlssc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_record(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr holds one JSON record")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_defaults() {
    let text = ok(&["calibrate", "--help"]);
    for needle in ["[default: 2000]", "[default: 0.0001]", "[default: 0:5,0:5,0:10,0.1:20]", "[default: 0.1]"] {
        assert!(text.contains(needle), "{needle}");
    }
    let text = ok(&["smooth", "--help"]);
    assert!(text.contains("--window-s") && text.contains("--gap-max-s"));
    assert!(ok(&["threshold", "--help"]).contains("[default: 90]"));
    assert!(!ok(&["--help"]).contains("opt-selftest"));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--kind", "oscillation", "--noise-std", "0.2", "--seed", "9", "--output", s(d)]);
    }
    let fa = std::fs::read(a.join("oscillation-000.csv")).unwrap();
    let fb = std::fs::read(b.join("oscillation-000.csv")).unwrap();
    assert_eq!(fa, fb);
    let text = String::from_utf8(fa).unwrap();
    assert!(text.contains("# seed: 9") && text.contains("# noise_std: 0.2"));
}

#[test]
fn pipeline_smooth_assess_calibrate_report() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let smooth = dir.path().join("smooth");
    ok(&["synth", "--kind", "stopping", "--count", "2", "--noise-std", "0.1", "--output", s(&raw)]);
    ok(&["synth", "--kind", "oscillation", "--output", s(&raw)]);
    assert!(raw.join("stopping-001.ann.json").exists());

    let listed = ok(&["smooth", "--input", s(&raw), "--output", s(&smooth)]);
    assert_eq!(listed.lines().count(), 3);
    let text = std::fs::read_to_string(smooth.join("stopping-000.csv")).unwrap();
    assert!(text.contains("# window_s: 1") && text.contains("Speed_smoothed") && text.contains("Jerk_mps3"));
    assert!(smooth.join("stopping-000.ann.json").exists());

    let table = ok(&["assess", "--input", s(&smooth)]);
    assert!(table.starts_with("# tool: tlssc"));
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("Stopping behaviors,2,"));
    assert!(rows[3].starts_with("All behaviors,3,"));

    let q = dir.path().join("q.json");
    let c = dir.path().join("c.json");
    ok(&["assess", "--input", s(&smooth), "--format", "json", "--output", s(&q)]);
    ok(&["calibrate", "--input", s(&smooth), "--budget", "200", "--format", "json", "--output", s(&c)]);
    let cal: Value = serde_json::from_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(cal["meta"]["budget"], "200");
    let groups: Vec<&str> = cal["calibration"].as_array().unwrap().iter().map(|r| r["group"].as_str().unwrap()).collect();
    assert_eq!(groups, ["stopping", "standard-follow-4"]);

    let doc = ok(&["report", s(&c), s(&q)]);
    let body: Vec<&str> = doc.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 1 + 2 + 1 + 1 + 3);
    assert!(body[1].starts_with("Stopping behavior,"));
    let only_cal = ok(&["report", s(&c)]);
    assert!(!only_cal.contains("Anomaly"));
}

#[test]
fn calibrate_recovers_noise_free_following() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "oscillation", "--group", "intersection-follow-2", "--output", s(dir.path())]);
    let out = ok(&["calibrate", "--input", s(dir.path()), "--budget", "400", "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let r = &v["calibration"][0];
    assert_eq!(r["group"], "intersection-follow-2");
    assert!(r["rmse"].as_f64().unwrap() < 0.05, "{r}");
}

#[test]
fn weakly_damped_follower_collides_on_oscillation() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlssc(&["synth", "--kind", "oscillation", "--group", "intersection-follow-7", "--output", s(dir.path())]);
    assert_eq!(error_record(&out)["error"]["kind"], "collision");
}

#[test]
fn threshold_modes() {
    let follow = ok(&["threshold", "--distance-m", "90"]);
    assert!(follow.contains("# mode: Following") && follow.contains("# inclusive: true"));
    let stop = ok(&["threshold", "--distance-m", "90", "--exclusive"]);
    assert!(stop.contains("# mode: PermissionStopping") && stop.contains("# crossed_stop_line: false"));
    let last = stop.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols.len(), 6);
    assert!(cols[1].parse::<f64>().unwrap() < 0.1);
    assert!(cols[5].is_empty());
}

#[test]
fn simulate_writes_a_parseable_segment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--leader", "free", "--v0", "0", "--horizon", "20", "--output", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# leader: free") && text.contains("Position_m"));
    let assessed = ok(&["assess", "--input", s(&out)]);
    assert!(assessed.contains("Accelerating behaviors,1,"));

    let fixture = dir.path().join("fx");
    ok(&["synth", "--kind", "oscillation", "--output", s(&fixture)]);
    let replay = ok(&["simulate", "--input", s(&fixture.join("oscillation-000.csv")), "--group", "standard-follow-4"]);
    assert!(replay.contains("Speed_lead") && replay.contains("Spacing_m"));
}

#[test]
fn errors_are_json_records() {
    let dir = tempfile::tempdir().unwrap();
    let rec = error_record(&tlssc(&["assess", "--input", s(&dir.path().join("missing"))]));
    assert_eq!(rec["error"]["command"], "assess");
    assert_eq!(rec["error"]["kind"], "io");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# behavior: stop-sign\nTime,Longitude,Latitude\n").unwrap();
    let rec = error_record(&tlssc(&["assess", "--input", s(&bad)]));
    assert_eq!(rec["error"]["kind"], "schema");

    let rec = error_record(&tlssc(&["calibrate", "--input", s(dir.path()), "--bounds", "1:0,0:5,0:10,0.1:20"]));
    assert_eq!(rec["error"]["kind"], "invalid_input");

    let rec = error_record(&tlssc(&["simulate", "--group", "nope"]));
    assert_eq!(rec["error"]["kind"], "invalid_input");
}

#[test]
fn gap_too_large_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "accelerating", "--output", s(dir.path())]);
    let path = dir.path().join("accelerating-000.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let first_data = lines.iter().position(|l| l.starts_with("Time")).unwrap() + 1;
    lines.drain(first_data + 50..first_data + 75);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let rec = error_record(&tlssc(&["smooth", "--input", s(&path), "--output", s(&dir.path().join("o"))]));
    assert_eq!(rec["error"]["kind"], "gap");
    assert!(rec["error"]["message"].as_str().unwrap().contains("accelerating-000"));
}

#[test]
fn hidden_selftest_passes() {
    let text = ok(&["opt-selftest", "--budget", "1000"]);
    assert_eq!(text.lines().filter(|l| l.contains("[PASS]")).count(), 3);
}
