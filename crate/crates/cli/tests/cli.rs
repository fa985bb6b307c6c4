//! Black-box tests of the `truncem` binary: exit codes, artifact bytes,
//! override flags and the manifest round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truncem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn reference_simulate(outdir: &str) -> String {
    format!(
        "\
experiment = simulate
seed = 42
output_dir = {outdir}
model.alpha1 = 2.0
model.mu1 = 1.0
model.sigma1 = 3.0
model.rho = 5.0
model.theta = 1.25
model.alpha2 = 2.0
model.mu2 = 2.0
model.sigma2 = 0.5
model.r_exp = 2.0
model.phi_exp = 1.5
model.x0 = 0.2
model.phi0 = 2.0
model.validation = boundary
truncation.h_exponent = 0.25
truncation.paper_compat = true
grid.t_end = 1.0
grid.delta = 1e-2
"
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn stderr_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad error record {text:?}: {e}"))
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("artifacts");
    let cfg = write_cfg(tmp.path(), "bad.cfg", "this is not a config\n");
    let res = run(&["--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let record = stderr_record(&res);
    assert_eq!(record["kind"], "config");
    assert_eq!(record["exit_code"], 2);
    assert!(!out.exists(), "a failed run must not create outputs");
}

#[test]
fn missing_config_file_exits_2() {
    let res = run(&["--config", "/nonexistent/nowhere.cfg"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_record(&res)["kind"], "config");
}

#[test]
fn strict_mode_rejects_the_boundary_model_with_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let body = reference_simulate(out.to_str().unwrap())
        .replace("model.validation = boundary", "model.validation = strict");
    let cfg = write_cfg(tmp.path(), "strict.cfg", &body);
    let res = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let record = stderr_record(&res);
    assert_eq!(record["kind"], "validation");
    assert!(
        record["error"].as_str().unwrap().contains("variance_drift_dominance"),
        "constraint must be named: {record}"
    );
    assert!(!out.exists());
}

#[test]
fn non_dividing_delta_ref_exits_3_with_named_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let body = format!(
        "\
experiment = converge
seed = 1
output_dir = {}
model.alpha1 = 2.0
model.mu1 = 1.0
model.sigma1 = 3.0
model.rho = 5.0
model.theta = 1.25
model.alpha2 = 2.0
model.mu2 = 2.0
model.sigma2 = 0.5
model.r_exp = 2.0
model.phi_exp = 1.5
model.x0 = 0.2
model.phi0 = 2.0
model.validation = boundary
truncation.h_exponent = 0.25
truncation.paper_compat = true
ensemble.n_paths = 50
ensemble.t_end = 1.0
ensemble.p_moment = 2.0
ensemble.delta_list = 0.015625, 0.0078125
ensemble.delta_ref = 0.0003
",
        out.display()
    );
    let cfg = write_cfg(tmp.path(), "bad_ref.cfg", &body);
    let res = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let record = stderr_record(&res);
    assert_eq!(record["kind"], "validation");
    assert!(!out.exists());
}

#[test]
fn simulate_writes_the_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = write_cfg(tmp.path(), "sim.cfg", &reference_simulate(out.to_str().unwrap()));
    let res = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let names: Vec<String> = read_dir_bytes(&out).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["manifest.cfg", "summary.json", "trajectory.csv"]);

    let table = truncem_core::report::parse_trajectory_csv(
        &std::fs::read_to_string(out.join("trajectory.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(table.times.len(), 101);
    assert_eq!(table.times[0], 0.0);
    assert_eq!(table.x[0], 0.2);
    assert_eq!(table.y[0], 2.0);
    assert!(table.x.iter().all(|v| v.is_finite()));

    let manifest = std::fs::read_to_string(out.join("manifest.cfg")).unwrap();
    assert!(manifest.contains("resolved.nu_q = 5.0000000000000000e0"));
    // At this step size the compat step function violates only the product
    // bound; the step sits below the (compat-exponent) admissibility cutoff.
    assert!(manifest.contains("resolved.warnings = step_bound_violated"));
    assert!(manifest.contains("resolved.boundary_cases = variance_drift_dominance_equality"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 42);
    assert_eq!(summary["fitted_order"], serde_json::Value::Null);
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = write_cfg(tmp.path(), "sim.cfg", &reference_simulate(out.to_str().unwrap()));
    let cfg = cfg.to_str().unwrap();

    assert_eq!(run(&["--config", cfg]).status.code(), Some(0));
    let first = read_dir_bytes(&out);

    assert_eq!(run(&["--config", cfg]).status.code(), Some(0));
    assert_eq!(read_dir_bytes(&out), first, "rerun changed artifact bytes");

    for workers in ["1", "3"] {
        assert_eq!(run(&["--config", cfg, "--workers", workers]).status.code(), Some(0));
        assert_eq!(read_dir_bytes(&out), first, "--workers {workers} changed artifact bytes");
    }

    let env_run = bin()
        .args(["--config", cfg])
        .env("TRUNCEM_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(env_run.status.code(), Some(0));
    assert_eq!(read_dir_bytes(&out), first, "TRUNCEM_WORKERS changed artifact bytes");
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = write_cfg(tmp.path(), "sim.cfg", &reference_simulate(out.to_str().unwrap()));
    let cfg = cfg.to_str().unwrap();

    assert_eq!(run(&["--config", cfg]).status.code(), Some(0));
    let base = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();

    assert_eq!(run(&["--config", cfg, "--seed", "99"]).status.code(), Some(0));
    let reseeded = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_ne!(base, reseeded, "a different seed must move the path");

    let manifest = std::fs::read_to_string(out.join("manifest.cfg")).unwrap();
    assert!(manifest.contains("seed = 99"));
}

#[test]
fn manifest_reruns_to_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = write_cfg(tmp.path(), "sim.cfg", &reference_simulate(out.to_str().unwrap()));
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let first = read_dir_bytes(&out);

    // The manifest names its own output_dir, so running it as a config
    // regenerates the same artifacts in place.
    let manifest_path = out.join("manifest.cfg");
    assert_eq!(run(&["--config", manifest_path.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(read_dir_bytes(&out), first, "manifest rerun is not a fixed point");
}

#[test]
fn invalid_workers_env_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = write_cfg(tmp.path(), "sim.cfg", &reference_simulate(out.to_str().unwrap()));
    let res = bin()
        .args(["--config", cfg.to_str().unwrap()])
        .env("TRUNCEM_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}
