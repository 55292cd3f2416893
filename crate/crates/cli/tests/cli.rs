use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lab(args: &[&str], outdir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbm-lab"))
        .args(args)
        .env("OUTDIR", outdir)
        .output()
        .expect("binary runs")
}

fn only_run_dir(root: &Path, experiment: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root.join(experiment))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

#[test]
fn help_lists_every_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "kernel_suite",
        "cumulant_xcheck",
        "pde_asymptotics",
        "cluster_suite",
        "tanaka",
        "renorm_d3",
        "renorm_d2",
        "rate",
        "bad_point",
        "laplace_xcheck",
    ] {
        assert!(text.contains(name), "{name} missing from help");
    }
}

#[test]
fn usage_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(lab(&["pde", "--workers", "many"], tmp.path()).status.code(), Some(3));
    assert_eq!(lab(&["cumulants", "tanaka"], tmp.path()).status.code(), Some(3));
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version": 1, "experiment": "pde_asymptotics", "params": {"lamda": 2.0}}"#,
    )
    .unwrap();
    let out = lab(&["pde", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    std::fs::write(&cfg, r#"{"schema_version": 7, "experiment": "pde_asymptotics"}"#).unwrap();
    assert_eq!(lab(&["pde", "--config", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(3));
    assert_eq!(lab(&["pde", "--config", "/nonexistent.json"], tmp.path()).status.code(), Some(3));
}

#[test]
fn pde_writes_radial_table_and_report_rerenders() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["pde", "--lambda", "1.0", "--rmin", "1e-6", "--quiet"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path(), "pde_asymptotics");
    let radial = std::fs::read_to_string(dir.join("radial_lambda_1.csv")).unwrap();
    assert_eq!(radial.lines().next(), Some("r,V,W,ratio"));
    assert!(dir.join("report.json").exists() && dir.join("config.json").exists());

    let rep = lab(&["report", dir.to_str().unwrap()], tmp.path());
    assert_eq!(rep.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "pde_asymptotics");
    assert_eq!(summary["verdict"]["pass"], true);
    assert!(lab(&["report", tmp.path().to_str().unwrap()], tmp.path()).status.code() == Some(3));
}

#[test]
fn seed_changes_the_run_but_not_quadrature_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["pde", "--quiet"], a.path()).status.code(), Some(0));
    assert_eq!(lab(&["pde", "--quiet", "--seed", "99"], b.path()).status.code(), Some(0));
    let (da, db) = (only_run_dir(a.path(), "pde_asymptotics"), only_run_dir(b.path(), "pde_asymptotics"));
    assert_ne!(da.file_name(), db.file_name());
    for table in ["radial_lambda_1.csv", "ratio.csv"] {
        assert_eq!(std::fs::read(da.join(table)).unwrap(), std::fs::read(db.join(table)).unwrap());
    }
}

#[test]
fn verify_accepts_suite_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("kernels.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version": 1, "experiment": "kernel_suite", "params": {
            "identity_points": [{"dim": 2, "t": 1.0, "x_norm": 0.3}],
            "bound_grid": {"alphas": [1.0], "times": [0.1, 1.0], "x_norms": [0.2]},
            "cutoff_radii": 20}}"#,
    )
    .unwrap();
    let out = lab(&["verify", "--config", cfg.to_str().unwrap(), "--quiet"], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("verify: PASS"));
    for e in ["kernel_suite", "cumulant_xcheck", "pde_asymptotics"] {
        only_run_dir(tmp.path(), e);
    }

    let wrong = tmp.path().join("wrong.json");
    std::fs::write(&wrong, r#"{"schema_version": 1, "experiment": "tanaka"}"#).unwrap();
    assert_eq!(lab(&["verify", "--config", wrong.to_str().unwrap()], tmp.path()).status.code(), Some(3));
}
