#![allow(clippy::approx_constant)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rscp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rscp"))
        .args(args)
        .output()
        .expect("spawn rscp")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn state_hydrogen_limit() {
    let out = rscp(&["state", "--n", "2", "--l", "1", "--m", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["E"].as_f64(), Some(-0.125));
    assert_eq!(v["gamma1"].as_f64(), Some(1.0));
    assert_eq!(v["n_prime"].as_f64(), Some(2.0));
    assert_eq!(v["k"].as_u64(), Some(0));
}

#[test]
fn state_with_barriers() {
    let out = rscp(&[
        "state", "--n", "2", "--l", "1", "--m", "0", "--b", "0.5", "--c", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(close(v["m_prime"].as_f64().unwrap(), 0.7071068, 1e-7));
    assert!(close(v["gamma1"].as_f64().unwrap(), 1.3660254, 1e-7));
    assert!(close(v["l_prime"].as_f64().unwrap(), 2.0731322, 1e-7));
    assert!(close(v["E"].as_f64().unwrap(), -0.0529429, 1e-7));
}

#[test]
fn even_parity_with_c_is_a_validation_error() {
    let out = rscp(&["state", "--n", "3", "--l", "2", "--m", "0", "--c", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["exit_code"].as_i64(), Some(2));
    assert!(e["error"]["message"].as_str().unwrap().contains("γ₁"));
    assert!(out.stdout.is_empty());
}

#[test]
fn imaginary_order_is_rejected() {
    let out = rscp(&["state", "--n", "4", "--l", "1", "--m", "0", "--b", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_2() {
    let out = rscp(&["state", "--n", "two", "--l", "1", "--m", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["exit_code"].as_i64(), Some(2));
    assert_eq!(rscp(&["--help"]).status.code(), Some(0));
}

#[test]
fn potential_cancels_at_quarter_angle() {
    let out = rscp(&[
        "potential",
        "--b",
        "0.5",
        "--c",
        "0.5",
        "--r",
        "1",
        "--theta",
        "45",
        "--degrees",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "theta,V");
    let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(v.abs() < 1e-12, "{v}");
}

#[test]
fn potential_coulomb_range() {
    let out = rscp(&["potential", "--r", "1:4:1", "--theta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let (r, v) = row.split_once(',').unwrap();
        let (r, v): (f64, f64) = (r.parse().unwrap(), v.parse().unwrap());
        assert!(close(v, -1.0 / r, 1e-9));
    }
}

#[test]
fn potential_pole_leaves_empty_field() {
    let out = rscp(&[
        "potential",
        "--c",
        "0.5",
        "--r",
        "1",
        "--theta",
        "80:90:10",
        "--degrees",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert_eq!(last, "90,");
}

#[test]
fn grid_writes_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.vtk");
    let out = rscp(&[
        "grid",
        "--n",
        "2",
        "--l",
        "1",
        "--m",
        "0",
        "--N",
        "11",
        "--extent",
        "10",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[4], "DIMENSIONS 11 11 11");
    assert_eq!(lines[5], "ORIGIN -10 -10 -10");
    assert_eq!(lines[6], "SPACING 2 2 2");
    assert_eq!(lines[7], "POINT_DATA 1331");
    assert_eq!(lines.len(), 10 + 121);
}

#[test]
fn isosurface_obj_is_nonempty() {
    let out = rscp(&[
        "isosurface",
        "--n",
        "2",
        "--l",
        "1",
        "--m",
        "0",
        "--N",
        "31",
        "--level",
        "50",
        "--cutaway",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let verts = text.lines().filter(|l| l.starts_with("v ")).count();
    let faces: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
    assert!(verts > 0 && !faces.is_empty());
    for f in faces {
        for idx in f.split_whitespace().skip(1) {
            let i: usize = idx.parse().unwrap();
            assert!(i >= 1 && i <= verts);
        }
    }
    assert!(text.contains("# cutaway=true"));
}

#[test]
fn isosurface_level_out_of_range() {
    let out = rscp(&[
        "isosurface",
        "--n",
        "2",
        "--l",
        "1",
        "--m",
        "0",
        "--N",
        "11",
        "--level",
        "150",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn slice_default_levels() {
    let out = rscp(&[
        "slice", "--n", "2", "--l", "1", "--m", "0", "--N", "41", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let sets = v["contours"].as_array().unwrap();
    assert_eq!(sets.len(), 10);
    let levels: Vec<f64> = sets.iter().map(|s| s["level"].as_f64().unwrap()).collect();
    assert_eq!(
        levels,
        (1..=10).map(|i| f64::from(i) * 10.0).collect::<Vec<_>>()
    );
}

#[test]
fn slice_csv_header() {
    let out = rscp(&[
        "slice", "--n", "2", "--l", "1", "--m", "0", "--N", "31", "--levels", "50",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("level,polyline,closed,index,y,z"));
    assert!(rows.all(|r| r.starts_with("50,")));
}

#[test]
fn verify_passes_for_hydrogen() {
    let out = rscp(&[
        "verify",
        "--n",
        "2",
        "--l",
        "1",
        "--m",
        "0",
        "--N",
        "61",
        "--samples",
        "20",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
}

#[test]
fn verify_without_grid() {
    let out = rscp(&[
        "verify",
        "--n",
        "6",
        "--l",
        "5",
        "--m",
        "0",
        "--c",
        "10",
        "--b",
        "0.5",
        "--no-grid",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["grid_mass"], Value::Null);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("out.csv");
    let out = rscp(&[
        "potential",
        "--r",
        "1",
        "--theta",
        "1",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"]["kind"].as_str(), Some("io"));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sweep_job_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    let job_text = r#"{
        "runs": [
            {"n": 2, "l": 1, "m": 0, "grid": {"N": 21}, "outputs": ["grid", "isosurface", "slice", "verify"], "levels": [50]},
            {"n": 3, "l": 2, "m": 1, "c": 0.5, "grid": {"N": 21}, "outputs": ["stats"], "levels": [50]}
        ]
    }"#;
    std::fs::write(&job, job_text).unwrap();
    let outdir = dir.path().join("out");
    let out = rscp(&[
        "sweep",
        "--job",
        job.to_str().unwrap(),
        "--output",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = read_json(&outdir.join("manifest.json"));
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["status"], "ok");
    for a in runs[0]["artifacts"].as_array().unwrap() {
        assert!(outdir.join(a["path"].as_str().unwrap()).exists(), "{a}");
    }
    assert!(outdir.join("n2_l1_m0_Z1_b0_c0.vtk").exists());
    assert!(runs[1]["stats"].is_object());
}

#[test]
fn sweep_missing_job_file() {
    let out = rscp(&["sweep", "--job", "/nonexistent/job.json"]);
    assert_eq!(out.status.code(), Some(4));
}
