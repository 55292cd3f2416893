use sbm_core::experiments::{
    render_summary, run_experiment, write_artifacts, ExperimentConfig, ExperimentId, ExperimentReport, Tier,
};
use sbm_core::Error;
use serde_json::json;

fn small_rate(workers: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentId::Rate)
        .with_param("n_init", json!(20))
        .with_param("dt", json!(0.005))
        .with_param("replicates", json!(12));
    c.workers = workers;
    c
}

fn quiet(cfg: &ExperimentConfig) -> sbm_core::experiments::RunOutput {
    run_experiment(cfg, &mut |_| {}).unwrap()
}

fn stripped(r: &ExperimentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(r.without_timing()).unwrap();
    // the worker count is part of the config and hence of the hash
    for key in ["workers", "config_hash"] {
        v.as_object_mut().unwrap().remove(key);
    }
    v["config"].as_object_mut().unwrap().remove("workers");
    v
}

#[test]
fn reports_are_reproducible_and_worker_independent() {
    let a = quiet(&small_rate(1));
    let b = quiet(&small_rate(1));
    let c = quiet(&small_rate(3));
    assert_eq!(a.report.without_timing(), b.report.without_timing());
    assert_eq!(stripped(&a.report), stripped(&c.report));
    assert_eq!(a.tables, c.tables);
    assert_ne!(a.report.config_hash, c.report.config_hash);
}

#[test]
fn seed_changes_monte_carlo_output() {
    let a = quiet(&small_rate(1));
    let mut cfg = small_rate(1);
    cfg.seed = 5;
    let b = quiet(&cfg);
    assert_ne!(a.table("localtime").unwrap().bytes, b.table("localtime").unwrap().bytes);
}

#[test]
fn artifacts_round_trip_through_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = quiet(&small_rate(1));
    let dir = write_artifacts(&out, tmp.path()).unwrap();
    assert!(dir.ends_with(format!("rate/{}", out.report.config_hash)));
    let first = std::fs::read(dir.join("localtime.csv")).unwrap();
    write_artifacts(&quiet(&small_rate(1)), tmp.path()).unwrap();
    assert_eq!(first, std::fs::read(dir.join("localtime.csv")).unwrap());

    let saved: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved.hash().unwrap(), out.report.config_hash);

    let s = render_summary(&dir).unwrap();
    assert_eq!(s.experiment, ExperimentId::Rate);
    assert_eq!(s.verdict, out.report.verdict);
    assert!(!s.levels.is_empty());
    let leftovers = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn config_errors_are_reported_as_config_errors() {
    let bad_key = ExperimentConfig::new(ExperimentId::Tanaka).with_param("replicate", json!(3));
    match run_experiment(&bad_key, &mut |_| {}) {
        Err(Error::Config(m)) => assert!(m.contains("replicate"), "{m}"),
        other => panic!("{:?}", other.map(|o| o.report.experiment)),
    }
    let too_coarse = ExperimentConfig::new(ExperimentId::Rate).with_param("dt", json!(0.1));
    assert!(matches!(run_experiment(&too_coarse, &mut |_| {}), Err(Error::Config(_))));
    assert!(matches!(
        ExperimentConfig::from_json(r#"{"schema_version": 1, "experiment": "nope"}"#),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        ExperimentConfig::from_json(r#"{"schema_version": 1, "experiment": "rate", "extra": 1}"#),
        Err(Error::Config(_))
    ));
    let mut zero = ExperimentConfig::new(ExperimentId::Rate);
    zero.workers = 0;
    assert!(matches!(run_experiment(&zero, &mut |_| {}), Err(Error::Config(_))));
}

#[test]
fn deterministic_suites_ignore_the_seed() {
    let mut cfg = ExperimentConfig::new(ExperimentId::PdeAsymptotics);
    let a = quiet(&cfg);
    cfg.seed = 123;
    let b = quiet(&cfg);
    assert_eq!(a.tables, b.tables);
    let values = |r: &ExperimentReport| r.checks.iter().map(|c| (c.name.clone(), c.value)).collect::<Vec<_>>();
    assert_eq!(values(&a.report), values(&b.report));
    assert!(a.report.checks.iter().any(|c| c.tier == Tier::Trend));
}

#[test]
fn shipped_configs_are_the_defaults() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for id in ExperimentId::ALL {
        let cfg = ExperimentConfig::load(&root.join(format!("{}.json", id.name()))).unwrap();
        assert_eq!(cfg.experiment, id);
        assert_eq!(cfg.hash().unwrap(), ExperimentConfig::new(id).hash().unwrap(), "{id}");
    }
}
