use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn oscilla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscilla")).args(args).env_remove("OSCILLA_CACHE_DIR").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_SWEEP: &str = r#"{
  "ladder": [2, 4, 8],
  "strip_mesh": {"ny_per_cell": 16, "nz": 4},
  "mesh_check": false
}"#;

#[test]
fn cell_solve_constant_profile_gives_unit_q0() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"profile": {"a0": 1.0}, "mesh": {"ny": 16, "nz": 4}}"#);
    let out = oscilla(&["cell-solve", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!((v["q0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["mesh"]["ny"], 16);
}

#[test]
fn cell_solve_reference_reports_both_q0_forms() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mesh": {"ny": 32, "nz": 8}}"#);
    let outfile = dir.path().join("cell.json");
    let out = oscilla(&["cell-solve", "-c", &cfg, "-o", outfile.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(outfile).unwrap()).unwrap();
    let (q0, qe) = (v["q0"].as_f64().unwrap(), v["q0_energy"].as_f64().unwrap());
    assert!(q0 > 0.0 && q0 < 1.0);
    assert!((q0 - qe).abs() < 1e-8);
    for key in ["grad_energy", "cell_area", "residuals"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"mesh\": {\"ny\": 16,\n  }\n}");
    let out = oscilla(&["cell-solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.json:3:"), "{err}");

    let cfg = write(dir.path(), "unknown.json", r#"{"mesh": {"ny": 16, "nz": 4, "nx": 3}}"#);
    let out = oscilla(&["cell-solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown field `nx`"), "{}", stderr(&out));
}

#[test]
fn invalid_profile_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"a0": 0.2, "modes": [{"k": 1, "c": 0.5}]}"#);
    let out = oscilla(&["validate-profile", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not strictly positive"), "{}", stderr(&out));

    let out = oscilla(&["validate-profile"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["g1"].as_f64().unwrap(), 1.5);
    assert_eq!(v["g_min"].as_f64().unwrap(), 0.5);
}

#[test]
fn short_ladder_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"ladder": [4, 8]}"#);
    let out = oscilla(&["converge", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("at least 3"), "{}", stderr(&out));
}

#[test]
fn dry_run_plans_without_solving() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("out.csv");
    let out = oscilla(&["converge", "--dry-run", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["plan"]["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["plan"]["rows"][0]["dofs"], 4 * 256 * 9);
    assert_eq!(v["config"]["strip_mesh"]["ny_per_cell"], 256);
    assert!(!csv.exists());

    for cmd in ["cell-solve", "homogenize", "solve", "validate-profile", "verify"] {
        let out = oscilla(&[cmd, "--dry-run"]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        stdout_json(&out);
    }
}

#[test]
fn dry_run_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL_SWEEP);
    let first = stdout_json(&oscilla(&["converge", "--dry-run", "-c", &cfg]));
    let resolved = write(dir.path(), "resolved.json", &first["config"].to_string());
    let second = stdout_json(&oscilla(&["converge", "--dry-run", "-c", &resolved]));
    assert_eq!(first, second);
}

#[test]
fn homogenize_with_unit_q0() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "h.json", r#"{"q0": 1.0}"#);
    let out = oscilla(&["homogenize", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["w0"]["modes"][0]["a"].as_f64().unwrap(), 0.5);
    assert!(v["residual"].as_f64().unwrap() <= 1e-15);
}

#[test]
fn solve_writes_field_summary_and_matrix() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"m": 4, "strip_mesh": {"ny_per_cell": 8, "nz": 4}}"#);
    let field = dir.path().join("w.txt");
    let mm = dir.path().join("a.mtx");
    let out = oscilla(&["solve", "-c", &cfg, "--field", field.to_str().unwrap(), "--dump-matrix", mm.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["dofs"], 4 * 8 * 5);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    assert!(v["energy_check"].as_f64().unwrap().abs() <= 1e-8);

    let text = std::fs::read_to_string(field).unwrap();
    assert!(text.starts_with("# oscilla mesh strip eps=1/4"));
    assert_eq!(text.lines().filter(|l| l.starts_with("u ")).count(), 4 * 8 * 5 + 5);
    let mtx = std::fs::read_to_string(mm).unwrap();
    let mut lines = mtx.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real symmetric"));
    assert!(lines.next().unwrap().starts_with("160 160 "));

    // without --field the mesh text precedes a one-line summary
    let out = oscilla(&["solve", "-c", &cfg]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let last: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(last["m"], 4);
}

#[test]
fn converge_outputs_and_determinism_across_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL_SWEEP);
    let run = |jobs: &str, tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let json = dir.path().join(format!("{tag}.json"));
        let plot = dir.path().join(tag);
        let out = oscilla(&[
            "--jobs",
            jobs,
            "converge",
            "-c",
            &cfg,
            "--csv",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
            "--plot",
            plot.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(dir.path().join(format!("{tag}.dat")).exists());
        assert!(dir.path().join(format!("{tag}.plt")).exists());
        let report: Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert!(report["slopes"]["p1"]["slope"].is_f64());
        std::fs::read_to_string(csv).unwrap()
    };
    let strip_time = |csv: String| -> Vec<String> { csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect() };
    let (a, b) = (strip_time(run("1", "one")), strip_time(run("2", "two")));
    assert_eq!(a.len(), 4);
    assert_eq!(a[0], "eps,dofs,e0,e1,e2,residual");
    assert_eq!(a, b);
}

#[test]
fn partial_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"ladder": [2, 4, 8], "strip_mesh": {"ny_per_cell": 8, "nz": 2}, "mesh_check": false, "solver": {"strip_tol": 1e-30, "max_iter": 400}}"#,
    );
    let out = oscilla(&["converge", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["status"] == "failed"));
    assert!(stderr(&out).contains("FAILED"));
}

#[test]
fn cache_reuses_results() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write(dir.path(), "c.json", r#"{"mesh": {"ny": 16, "nz": 4}}"#);
    let run = || Command::new(env!("CARGO_BIN_EXE_oscilla")).args(["cell-solve", "-c", &cfg]).env("OSCILLA_CACHE_DIR", &cache).output().unwrap();
    let first = run();
    assert!(first.status.success());
    assert!(!stderr(&first).contains("cache hit"));
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    let second = run();
    assert!(stderr(&second).contains("cache hit"));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn verify_selected_checks() {
    let out = oscilla(&["verify", "--only", "5,10"]);
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let out = oscilla(&["verify", "--only", "2", "--q0-identity-offset", "1e-4"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(stdout.contains("FAIL  2 q0 range, identity and Richardson stability"), "{stdout}");
    assert!(stderr(&out).contains("failed checks: 2"));

    let out = oscilla(&["verify", "--only", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_jobs_rejected() {
    let out = oscilla(&["--jobs", "0", "validate-profile"]);
    assert_eq!(out.status.code(), Some(2));
}
