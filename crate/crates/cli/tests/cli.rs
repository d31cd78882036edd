use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn polyfilt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyfilt"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Contracting linear system `x(k+1) = 0.5·x(k) + w`, `y = x1 + x2 + v`.
fn linear_scenario(n: usize) -> Value {
    let cols = n + 1;
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..cols)
                .map(|j| if j == i + 1 { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    let c: Vec<f64> = (0..cols)
        .map(|j| if j == 1 || j == 2 { 1.0 } else { 0.0 })
        .collect();
    json!({
        "version": 1,
        "name": "linear",
        "model": {
            "n": n, "m_out": 1, "degree": 1,
            "A": a, "C": [c],
            "process_noise": { "norm": "inf", "radius": 0.05 },
            "measurement_noise": { "norm": "inf", "radius": 0.1 },
            "initial_set": { "norm": "inf", "radius": 1.0 }
        },
        "filter": { "sos_half_degree": 1, "points": 10, "max_halfspaces": 2, "seed": 3, "horizon": 3, "mc_points": 2000 },
        "simulation": { "x0": vec![0.3; n], "seed": 11 }
    })
}

fn write_scenario(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trajectory_files() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let out = tmp.path().join("run");
    let o = polyfilt(&["simulate", "--scenario", s(&sc), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = read(&out.join("trajectory.json"));
    assert_eq!(traj["states"].as_array().unwrap().len(), 4);
    assert_eq!(traj["outputs"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,x1,x2,y1");
    assert_eq!(lines.len(), 5);
    assert_eq!(read(&out.join("measurements.json")), traj["outputs"]);
}

#[test]
fn filter_verify_plot_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let out = tmp.path().join("run");
    let o = polyfilt(&[
        "filter",
        "--scenario",
        s(&sc),
        "--out",
        s(&out),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let summary = read(&out.join("summary.json"));
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["steps"], 3);
    assert_eq!(summary["truth_contained"], json!([true, true, true]));
    for k in 1..=3 {
        let rec = read(&out.join(format!("steps/step_{k:04}.json")));
        assert_eq!(rec["step"], k);
        let faces = rec["polytope"]["halfspaces"].as_array().unwrap().len();
        assert!((4..=6).contains(&faces), "{faces} half-spaces");
    }

    let o = polyfilt(&["verify", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("certificates verified"));

    let o = polyfilt(&["plot", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));

    let o = polyfilt(&["report", "--out", s(&out)]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(
        csv.starts_with("step,width_x1,width_x2,box_volume,polytope_volume_mc,ratio,halfspaces")
    );
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert!(polyfilt(&["filter", "--scenario", s(&sc), "--out", s(out)])
            .status
            .success());
    }
    for file in [
        "summary.json",
        "measurements.json",
        "trajectory.json",
        "steps/step_0003.json",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn seed_flag_changes_the_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(
        polyfilt(&["simulate", "--scenario", s(&sc), "--out", s(&a)])
            .status
            .success()
    );
    assert!(polyfilt(&[
        "simulate",
        "--scenario",
        s(&sc),
        "--out",
        s(&b),
        "--seed",
        "99"
    ])
    .status
    .success());
    assert_ne!(
        read(&a.join("measurements.json")),
        read(&b.join("measurements.json"))
    );
}

#[test]
fn overrides_reach_the_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let out = tmp.path().join("run");
    let o = polyfilt(&[
        "filter",
        "--scenario",
        s(&sc),
        "--out",
        s(&out),
        "--max-halfspaces",
        "0",
        "--points",
        "4",
        "--timings",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = read(&out.join("steps/step_0001.json"));
    assert_eq!(rec["polytope"]["halfspaces"].as_array().unwrap().len(), 4);
    assert!(rec["timings"]["total_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn inconsistent_measurement_has_its_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = linear_scenario(2);
    v.as_object_mut().unwrap().remove("simulation");
    v["measurements"] = json!([[0.2], [25.0]]);
    v["filter"]["horizon"] = json!(2);
    let sc = write_scenario(tmp.path(), "bad.json", &v);
    let out = tmp.path().join("run");
    let o = polyfilt(&["filter", "--scenario", s(&sc), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = read(&out.join("summary.json"));
    assert_eq!(summary["status"], "inconsistent_measurement");
    assert_eq!(summary["steps"], 1);
    assert!(out.join("steps/step_0001.json").exists());
}

#[test]
fn malformed_config_reports_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = linear_scenario(2);
    v["model"]["process_noise"] = json!({ "norm": "inf", "radius": "big" });
    let sc = write_scenario(tmp.path(), "bad.json", &v);
    let o = polyfilt(&[
        "filter",
        "--scenario",
        s(&sc),
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("model.process_noise") && err.contains("line"),
        "{err}"
    );

    let mut v = linear_scenario(2);
    v["version"] = json!(7);
    let sc = write_scenario(tmp.path(), "v.json", &v);
    let o = polyfilt(&["simulate", "--scenario", s(&sc)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version"));
}

#[test]
fn missing_scenario_is_an_io_error() {
    let o = polyfilt(&["simulate", "--scenario", "/nonexistent/none.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tampered_certificate_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write_scenario(tmp.path(), "s.json", &linear_scenario(2));
    let out = tmp.path().join("run");
    assert!(
        polyfilt(&["filter", "--scenario", s(&sc), "--out", s(&out)])
            .status
            .success()
    );
    let path = out.join("steps/step_0002.json");
    let mut rec = read(&path);
    let nu = rec["certificates"][0]["certificate"]["nu"]
        .as_f64()
        .unwrap();
    rec["certificates"][0]["certificate"]["nu"] = json!(nu - 0.1);
    rec["polytope"]["halfspaces"][0]["nu"] = json!(nu - 0.1);
    fs::write(&path, serde_json::to_string(&rec).unwrap()).unwrap();
    let o = polyfilt(&["verify", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 2 half-space 0"));
}

#[test]
fn plot_refuses_three_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = linear_scenario(3);
    v["filter"]["horizon"] = json!(1);
    v["filter"]["max_halfspaces"] = json!(0);
    let sc = write_scenario(tmp.path(), "s.json", &v);
    let out = tmp.path().join("run");
    let o = polyfilt(&["filter", "--scenario", s(&sc), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(polyfilt(&["plot", "--out", s(&out)]).status.code(), Some(2));
}
