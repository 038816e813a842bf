use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn osfield(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osfield"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn dims_reference_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["dims", "--H", "0.3333,0.5", "--d", "2"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let g = v["result"]["graph_dim"].as_f64().unwrap();
    assert!((g - 3.3333).abs() < 2e-4, "{g}");
    assert_eq!(v["result"]["range_dim"].as_f64().unwrap(), 2.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS dims.boundary_jump"));
}

#[test]
fn dims_boundary_is_indeterminate() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["verify", "dims", "--H", "0.5,0.5", "--d", "4"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["level_set_status"], "indeterminate");
    assert!(v["result"]["level_set_dim"].is_null());
}

#[test]
fn scaling_on_one_dimensional_oracle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["verify", "scaling", "--diag", "2", "--seed", "11"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    let gate = &v["gates"][0];
    assert_eq!(gate["name"], "scaling.max_rel_err");
    assert_eq!(gate["threshold"].as_f64().unwrap(), 5e-4);
}

#[test]
fn planar_cell_verb_and_alias_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = osfield(&["verify", "planar-cell"], dir.path());
    let b = osfield(&["verify", "example62"], dir.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["gates"].as_array().unwrap().len(), 6);
}

#[test]
fn simulate_without_seed_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["simulate", "--diag", "2", "--level", "3"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));
}

#[test]
fn unknown_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["dims", "--bogus"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = osfield(&["verify", "scaling", "--diag", "0.5", "--seed", "1"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, fmt: &str| {
        let out = osfield(
            &[
                "simulate", "--diag", "1.5,2.5", "--level", "3", "--seed", "9", "--format", fmt, "--out", name,
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv", "csv");
    let b = run("b.csv", "csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,value"));
    assert_eq!(lines.next(), Some("0,0,0"));
    assert_eq!(text.lines().count(), 1 + 64);

    let bin = run("a.bin", "f64le");
    assert_eq!(u64::from_le_bytes(bin[..8].try_into().unwrap()), 64);
    assert_eq!(u64::from_le_bytes(bin[8..16].try_into().unwrap()), 3);
    assert_eq!(bin.len(), 16 + 8 * 64 * 3);
    assert_eq!(bin, run("b.bin", "f64le"));
}

#[test]
fn tau_and_variogram_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "x1\n0\n0.25\n-4\n").unwrap();
    let out = osfield(&["tau", "--diag", "2", "--points", "p.csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "x1,tau,dir1");
    assert_eq!(rows[1], "0,0,");
    // For E = [2] the radius is sqrt(|x| / 2) and the direction is ±2.
    let cells: Vec<f64> = rows[3].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cells[1] - 2f64.sqrt()).abs() < 1e-12);
    assert!((cells[2] + 2.0).abs() < 1e-12);

    let out = osfield(&["variogram", "--diag", "2", "--lags", "p.csv"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    let want = 8.0 * std::f64::consts::PI * 0.25;
    assert!((row[1] - want).abs() < 1e-3 * want, "{row:?}");
}

#[test]
fn bad_points_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "x1,x2\n1,oops\n").unwrap();
    let out = osfield(&["tau", "--diag", "1.5,2.5", "--points", "p.csv"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("oops"));
}

#[test]
fn toml_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        r#"
seed = 4

[model.exponent]
blocks = [{ kind = "cell", a = 2.0, size = 1 }]

[experiment]
kind = "scaling"
lags = 3
factors = [0.5, 2.0]

[output]
path = "scaling.json"
csv = "scaling.csv"
"#,
    )
    .unwrap();
    let out = osfield(
        &["verify", "scaling", "--config", "exp.toml", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("scaling.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["result"]["lags"].as_array().unwrap().len(), 3);
    let trace = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 3);
    let first = std::fs::read(dir.path().join("scaling.json")).unwrap();
    osfield(
        &["verify", "scaling", "--config", "exp.toml", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(first, std::fs::read(dir.path().join("scaling.json")).unwrap());
}

#[test]
fn config_for_another_verb_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"experiment": {"kind": "dims", "H": [0.5], "d": 1}}"#,
    )
    .unwrap();
    let out = osfield(&["verify", "scaling", "--config", "exp.json"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn failing_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{
  "model": {"exponent": {"blocks": [{"kind": "cell", "a": 2.0, "size": 1}]}},
  "experiment": {"kind": "slnd", "count": 5, "max_points": 3, "scale_tol": -1.0},
  "seed": 1
}"#,
    )
    .unwrap();
    let out = osfield(&["verify", "slnd", "--config", "exp.json"], dir.path());
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("PASS slnd.min_ratio"), "{stderr}");
    assert!(stderr.contains("FAIL slnd.scale_spread"), "{stderr}");
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = osfield(&["simulate", "--diag", "2", "--level", "5", "--seed", "2"], dir.path());
    let b = osfield(
        &[
            "--threads",
            "1",
            "simulate",
            "--diag",
            "2",
            "--level",
            "5",
            "--seed",
            "2",
            "--method",
            "spectral",
            "--freq-count",
            "1024",
        ],
        dir.path(),
    );
    let c = osfield(
        &[
            "--threads",
            "3",
            "simulate",
            "--diag",
            "2",
            "--level",
            "5",
            "--seed",
            "2",
            "--method",
            "spectral",
            "--freq-count",
            "1024",
        ],
        dir.path(),
    );
    assert_eq!(code(&a), 0);
    assert_eq!(b.stdout, c.stdout);
    assert_ne!(a.stdout, b.stdout);
}
