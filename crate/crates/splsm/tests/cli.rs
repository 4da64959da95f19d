//! End-to-end checks of the command-line interface: exit codes, error
//! wording, and output formats.

use std::path::PathBuf;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_splsm")
}

fn cache_dir() -> PathBuf {
    let dir = std::env::temp_dir().join("splsm-acceptance-cache");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Horseshoe-domain CSV with `p` covariates; only z1 and z2 enter the truth.
fn write_fixture(path: &std::path::Path, p: usize, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut out = String::from("resp");
    for j in 0..p {
        out.push_str(&format!(",z{}", j + 1));
    }
    out.push_str(",lon,lat\n");
    let mut count = 0;
    while count < n {
        let x = rng.gen::<f64>() * 3.6 - 0.8;
        let y = rng.gen::<f64>() * 1.6 - 0.8;
        let d = if x >= 0.0 {
            y.abs() - 0.5
        } else {
            (x * x + y * y).sqrt() - 0.5
        };
        if d.abs() > 0.3 || (x >= 0.0 && y.abs() < 0.15) || x > 2.9 {
            continue;
        }
        let z: Vec<f64> = (0..p).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let lin: f64 = z
            .iter()
            .enumerate()
            .map(|(j, v)| if j == 0 { *v } else if j == 1 { -v } else { 0.0 })
            .sum();
        let noise = 0.2 * (rng.gen::<f64>() - 0.5);
        out.push_str(&format!("{}", lin + x + y * y + noise));
        for v in &z {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{x},{y}\n"));
        count += 1;
    }
    std::fs::write(path, out).unwrap();
}

fn fit_cmd(data: &std::path::Path, z: &str) -> Command {
    let mut cmd = Command::new(bin());
    cmd.args(["fit", "--data", data.to_str().unwrap(), "--mesh", "tri1"])
        .args(["--y", "resp", "--x", "lon,lat"])
        .args(["--cache-dir", cache_dir().to_str().unwrap()]);
    if !z.is_empty() {
        cmd.args(["--z", z]);
    }
    cmd
}

#[test]
fn missing_data_file_is_input_error() {
    let out = Command::new(bin())
        .args(["fit", "--data", "/nonexistent/file.csv", "--mesh", "tri1"])
        .args(["--y", "resp", "--x", "lon,lat"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/file.csv"), "stderr: {err}");
}

#[test]
fn unknown_mesh_id_is_input_error() {
    let data = std::env::temp_dir().join("cli-unknown-mesh.csv");
    write_fixture(&data, 2, 60);
    let out = Command::new(bin())
        .args(["fit", "--data", data.to_str().unwrap(), "--mesh", "tri9"])
        .args(["--y", "resp", "--x", "lon,lat"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tri9"));
}

#[test]
fn missing_column_is_named_in_error() {
    let data = std::env::temp_dir().join("cli-missing-col.csv");
    write_fixture(&data, 2, 60);
    let out = fit_cmd(&data, "z1,z7").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("'z7'"), "stderr: {err}");
}

#[test]
fn malformed_cell_reports_row_and_column() {
    let data = std::env::temp_dir().join("cli-bad-cell.csv");
    write_fixture(&data, 2, 60);
    let mut text = std::fs::read_to_string(&data).unwrap();
    // corrupt the z1 cell of the first data row
    let nl = text.find('\n').unwrap();
    let row_end = text[nl + 1..].find('\n').unwrap() + nl + 1;
    let row: Vec<&str> = text[nl + 1..row_end].split(',').collect();
    let mut bad = row.clone();
    bad[1] = "oops";
    let bad_row = bad.join(",");
    text.replace_range(nl + 1..row_end, &bad_row);
    std::fs::write(&data, text).unwrap();
    let out = fit_cmd(&data, "z1,z2").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("'z1'") && err.contains("oops"), "stderr: {err}");
}

#[test]
fn duplicate_role_columns_rejected() {
    let data = std::env::temp_dir().join("cli-dup-role.csv");
    write_fixture(&data, 2, 60);
    let out = fit_cmd(&data, "resp,z2").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("more than one role"), "stderr: {err}");
}

#[test]
fn pure_smoothing_fit_has_no_covariates() {
    let data = std::env::temp_dir().join("cli-p0.csv");
    write_fixture(&data, 0, 150);
    let out = fit_cmd(&data, "").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["beta"].as_array().unwrap().len(), 0);
    assert!(!v["gamma"].as_array().unwrap().is_empty());
}

#[test]
fn fit_recovers_true_support() {
    let data = std::env::temp_dir().join("cli-support.csv");
    write_fixture(&data, 4, 250);
    let out = fit_cmd(&data, "z1,z2,z3,z4").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let active: Vec<&str> = v["active_names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert_eq!(active, ["z1", "z2"]);
    assert!((v["beta"][0].as_f64().unwrap() - 1.0).abs() < 0.15);
    assert!((v["beta"][1].as_f64().unwrap() + 1.0).abs() < 0.15);
}

#[test]
fn predict_marks_off_domain_rows() {
    let data = std::env::temp_dir().join("cli-predict-train.csv");
    write_fixture(&data, 2, 150);
    let model = std::env::temp_dir().join("cli-predict-model.json");
    let out = fit_cmd(&data, "z1,z2")
        .args(["--out", model.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // one in-domain row, one far outside the horseshoe
    let newdata = std::env::temp_dir().join("cli-predict-new.csv");
    std::fs::write(&newdata, "lon,lat,z1,z2\n1.0,0.3,0.5,-0.2\n10.0,10.0,0.0,0.0\n").unwrap();
    let out = Command::new(bin())
        .args(["predict", "--model", model.to_str().unwrap()])
        .args(["--data", newdata.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,alpha,prediction");
    assert!(!lines[1].contains("NA"));
    assert!(lines[2].ends_with("NA,NA"));
}

#[test]
fn simulate_single_rep_emits_valid_json() {
    let out = Command::new(bin())
        .args(["simulate", "--example", "horseshoe", "--mesh", "tri1"])
        .args(["--n", "150", "--reps", "1", "--seed", "3"])
        .args(["--cache-dir", cache_dir().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["metrics"]["replications"].as_u64(), Some(1));
    assert_eq!(v["records"].as_array().unwrap().len(), 1);
}

#[test]
fn mesh_check_flags_nonconforming_fixture() {
    let out = Command::new(bin())
        .args(["mesh-check", "--mesh"])
        .arg(fixture_path("nonconforming_vertices.csv"))
        .arg("--triangles")
        .arg(fixture_path("nonconforming_triangles.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["conforming"].as_bool(), Some(false));
    assert!(!v["offenders"].as_array().unwrap().is_empty());
}
