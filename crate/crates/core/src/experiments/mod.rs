//! Experiment orchestration: configs, verdicts, reports and artifacts.
//!
//! A config names one registered experiment plus optional parameter
//! overrides. Resolution fills every parameter with its default, and the
//! canonical JSON of the resolved config (seed and worker count included)
//! is hashed. Verdict thresholds live in the parameters, so they are fixed
//! before any data is seen.

mod calibration;
mod deterministic;
mod localtime_runs;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernels::Horizon;
use crate::particles::sha256_hex;

pub use calibration::ClusterParams;
pub use deterministic::{CumulantParams, KernelSuiteParams, PdeParams};
pub use localtime_runs::{BadPointParams, LaplaceParams, RateParams, RenormD2Params, RenormD3Params, TanakaParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    KernelSuite,
    CumulantXcheck,
    PdeAsymptotics,
    ClusterSuite,
    Tanaka,
    RenormD3,
    RenormD2,
    Rate,
    BadPoint,
    LaplaceXcheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::KernelSuite,
        ExperimentId::CumulantXcheck,
        ExperimentId::PdeAsymptotics,
        ExperimentId::ClusterSuite,
        ExperimentId::Tanaka,
        ExperimentId::RenormD3,
        ExperimentId::RenormD2,
        ExperimentId::Rate,
        ExperimentId::BadPoint,
        ExperimentId::LaplaceXcheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::KernelSuite => "kernel_suite",
            ExperimentId::CumulantXcheck => "cumulant_xcheck",
            ExperimentId::PdeAsymptotics => "pde_asymptotics",
            ExperimentId::ClusterSuite => "cluster_suite",
            ExperimentId::Tanaka => "tanaka",
            ExperimentId::RenormD3 => "renorm_d3",
            ExperimentId::RenormD2 => "renorm_d2",
            ExperimentId::Rate => "rate",
            ExperimentId::BadPoint => "bad_point",
            ExperimentId::LaplaceXcheck => "laplace_xcheck",
        }
    }

    /// The claim the experiment probes, in plain words.
    pub fn claim(&self) -> &'static str {
        match self {
            ExperimentId::KernelSuite => {
                "Tanaka identities hold in expectation and the heat kernel obeys the singular-kernel inequalities"
            }
            ExperimentId::CumulantXcheck => {
                "occupation cumulants follow the Catalan recursion and satisfy the exponential-moment bound"
            }
            ExperimentId::PdeAsymptotics => {
                "the radial solution of ΔV = V² with a 1/r pole has a −log(1/r) second-order term"
            }
            ExperimentId::ClusterSuite => {
                "the particle system has the Feller mass law, the right survival curve and canonical clusters"
            }
            ExperimentId::Tanaka => "local-time estimators are unbiased and the Tanaka decomposition holds in d=2 and d=3",
            ExperimentId::RenormD3 => {
                "in d=3 the local time minus c/|x|, scaled by its log-size, is asymptotically normal"
            }
            ExperimentId::RenormD2 => "in d=2 the local time minus its logarithmic singularity converges pathwise",
            ExperimentId::Rate => "in d=3 |x|^α(L − c/|x|) tends to zero for every α < 1",
            ExperimentId::BadPoint => {
                "at an atom of the initial measure the local time blows up and rarely drops below half its mean"
            }
            ExperimentId::LaplaceXcheck => {
                "the Laplace transform of total local time solves the singular semilinear equation"
            }
        }
    }

    /// True for the quadrature-only suites, whose output ignores the seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            ExperimentId::KernelSuite | ExperimentId::PdeAsymptotics
        )
    }

    /// Fully resolved default parameters.
    pub fn default_params(&self) -> Value {
        let v = match self {
            ExperimentId::KernelSuite => serde_json::to_value(KernelSuiteParams::default()),
            ExperimentId::CumulantXcheck => serde_json::to_value(CumulantParams::default()),
            ExperimentId::PdeAsymptotics => serde_json::to_value(PdeParams::default()),
            ExperimentId::ClusterSuite => serde_json::to_value(ClusterParams::default()),
            ExperimentId::Tanaka => serde_json::to_value(TanakaParams::default()),
            ExperimentId::RenormD3 => serde_json::to_value(RenormD3Params::default()),
            ExperimentId::RenormD2 => serde_json::to_value(RenormD2Params::default()),
            ExperimentId::Rate => serde_json::to_value(RateParams::default()),
            ExperimentId::BadPoint => serde_json::to_value(BadPointParams::default()),
            ExperimentId::LaplaceXcheck => serde_json::to_value(LaplaceParams::default()),
        };
        v.expect("default parameters serialize")
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentId::ALL.iter().map(|i| i.name()).collect();
                Error::Config(format!("unknown experiment `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Overrides of the experiment's parameters; missing keys take defaults.
    #[serde(default)]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed: 0,
            workers: 1,
            params: Value::Null,
        }
    }

    /// Replace one parameter (a top-level key of `params`).
    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        if !self.params.is_object() {
            self.params = Value::Object(Default::default());
        }
        self.params
            .as_object_mut()
            .expect("object")
            .insert(key.to_string(), value);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.check_version()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check_version(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Validate the parameters and fill in every default.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        self.check_version()?;
        let params = match self.experiment {
            ExperimentId::KernelSuite => canonical::<KernelSuiteParams>(&self.params)?,
            ExperimentId::CumulantXcheck => canonical::<CumulantParams>(&self.params)?,
            ExperimentId::PdeAsymptotics => canonical::<PdeParams>(&self.params)?,
            ExperimentId::ClusterSuite => canonical::<ClusterParams>(&self.params)?,
            ExperimentId::Tanaka => canonical::<TanakaParams>(&self.params)?,
            ExperimentId::RenormD3 => canonical::<RenormD3Params>(&self.params)?,
            ExperimentId::RenormD2 => canonical::<RenormD2Params>(&self.params)?,
            ExperimentId::Rate => canonical::<RateParams>(&self.params)?,
            ExperimentId::BadPoint => canonical::<BadPointParams>(&self.params)?,
            ExperimentId::LaplaceXcheck => canonical::<LaplaceParams>(&self.params)?,
        };
        Ok(ExperimentConfig {
            params,
            ..self.clone()
        })
    }

    /// SHA-256 of the resolved config's canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let r = self.resolve()?;
        Ok(sha256_hex(serde_json::to_string(&r)?.as_bytes()))
    }
}

fn parse_params<P: DeserializeOwned + Default>(v: &Value) -> Result<P> {
    match v {
        Value::Null => Ok(P::default()),
        Value::Object(_) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("params: {e}"))),
        _ => Err(Error::Config("params must be a JSON object".into())),
    }
}

fn canonical<P: DeserializeOwned + Serialize + Default>(v: &Value) -> Result<Value> {
    let p: P = parse_params(v)?;
    Ok(serde_json::to_value(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Hard gate: a failure makes the run fail.
    Pass,
    /// Direction of a slowly converging limit; reported, not gated.
    Trend,
    /// Reported only.
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub tier: Tier,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Every pass-tier check holds.
    pub pass: bool,
    /// Every trend-tier check holds.
    pub trends_hold: bool,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub finished_unix: u64,
    pub runtime_secs: f64,
    /// Wall-clock seconds of named phases.
    #[serde(default)]
    pub phases: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub claim: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub sample_sizes: BTreeMap<String, u64>,
    pub statistics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// 0 when every pass-tier check holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.verdict.pass {
            0
        } else {
            2
        }
    }

    /// The report without its wall-clock fields.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing {
                started_unix: 0,
                finished_unix: 0,
                runtime_secs: 0.0,
                phases: BTreeMap::new(),
            },
            ..self.clone()
        }
    }
}

/// One CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn from_records<T: Serialize>(name: &str, rows: &[T]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(Self {
            name: name.to_string(),
            bytes,
        })
    }

    pub fn from_bytes(name: &str, bytes: Vec<u8>) -> Self {
        Self {
            name: name.to_string(),
            bytes,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// Row of the shared local-time CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeRow {
    pub experiment: String,
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub eps: Option<f64>,
    pub x_norm: f64,
    pub t: String,
    pub replicate: u64,
    pub value: f64,
    pub aux1: Option<f64>,
    pub aux2: Option<f64>,
}

pub fn horizon_label(t: Horizon) -> String {
    match t {
        Horizon::Finite(t) => format!("{t}"),
        Horizon::Infinite => "inf".into(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Mutable state shared by a runner while it executes.
pub(crate) struct Ctx<'a> {
    pub seed: u64,
    pub workers: usize,
    log: &'a mut dyn FnMut(&str),
    checks: Vec<Check>,
    statistics: BTreeMap<String, Value>,
    samples: BTreeMap<String, u64>,
    tables: Vec<Table>,
    phases: BTreeMap<String, f64>,
}

impl<'a> Ctx<'a> {
    fn new(seed: u64, workers: usize, log: &'a mut dyn FnMut(&str)) -> Self {
        Self {
            seed,
            workers,
            log,
            checks: Vec::new(),
            statistics: BTreeMap::new(),
            samples: BTreeMap::new(),
            tables: Vec::new(),
            phases: BTreeMap::new(),
        }
    }

    pub fn log(&mut self, msg: &str) {
        (self.log)(msg);
    }

    /// Record the wall-clock time of a phase started at `since`.
    pub fn phase(&mut self, name: &str, since: std::time::Instant) {
        self.phases.insert(name.to_string(), since.elapsed().as_secs_f64());
    }

    /// Seed of a named sub-run, derived from the master seed.
    pub fn sub_seed(&self, label: &str) -> u64 {
        let h = sha256_hex(format!("{}:{label}", self.seed).as_bytes());
        u64::from_str_radix(&h[..16], 16).expect("hex")
    }

    fn push(&mut self, tier: Tier, name: &str, passed: bool, value: Option<f64>, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            tier,
            passed,
            value,
            detail,
        });
    }

    pub fn pass(&mut self, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) {
        self.push(Tier::Pass, name, passed, value, detail.into());
    }

    pub fn trend(&mut self, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) {
        self.push(Tier::Trend, name, passed, value, detail.into());
    }

    pub fn diag(&mut self, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) {
        self.push(Tier::Diagnostic, name, passed, value, detail.into());
    }

    /// Pass-tier |z| ≤ limit.
    pub fn z_check(&mut self, name: &str, z: f64, limit: f64, detail: impl Into<String>) {
        self.pass(name, z.abs() <= limit, Some(z), detail);
    }

    pub fn stat<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.statistics.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn samples(&mut self, key: &str, n: u64) {
        self.samples.insert(key.to_string(), n);
    }

    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.tables.push(Table::from_records(name, rows)?);
        Ok(())
    }

    pub fn raw_table(&mut self, table: Table) {
        self.tables.push(table);
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Run one experiment. `log` receives progress lines.
pub fn run_experiment(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<RunOutput> {
    let resolved = cfg.resolve()?;
    let hash = sha256_hex(serde_json::to_string(&resolved)?.as_bytes());
    let started = unix_now();
    let clock = Instant::now();
    let mut ctx = Ctx::new(resolved.seed, resolved.workers, log);
    let p = &resolved.params;
    match resolved.experiment {
        ExperimentId::KernelSuite => deterministic::kernel_suite(&parse_params(p)?, &mut ctx)?,
        ExperimentId::CumulantXcheck => deterministic::cumulant_xcheck(&parse_params(p)?, &mut ctx)?,
        ExperimentId::PdeAsymptotics => deterministic::pde_asymptotics(&parse_params(p)?, &mut ctx)?,
        ExperimentId::ClusterSuite => calibration::cluster_suite(&parse_params(p)?, &mut ctx)?,
        ExperimentId::Tanaka => localtime_runs::tanaka(&parse_params(p)?, &mut ctx)?,
        ExperimentId::RenormD3 => localtime_runs::renorm_d3(&parse_params(p)?, &mut ctx)?,
        ExperimentId::RenormD2 => localtime_runs::renorm_d2(&parse_params(p)?, &mut ctx)?,
        ExperimentId::Rate => localtime_runs::rate(&parse_params(p)?, &mut ctx)?,
        ExperimentId::BadPoint => localtime_runs::bad_point(&parse_params(p)?, &mut ctx)?,
        ExperimentId::LaplaceXcheck => localtime_runs::laplace_xcheck(&parse_params(p)?, &mut ctx)?,
    }
    let failed: Vec<String> = ctx
        .checks
        .iter()
        .filter(|c| c.tier != Tier::Diagnostic && !c.passed)
        .map(|c| c.name.clone())
        .collect();
    let verdict = Verdict {
        pass: ctx.checks.iter().filter(|c| c.tier == Tier::Pass).all(|c| c.passed),
        trends_hold: ctx.checks.iter().filter(|c| c.tier == Tier::Trend).all(|c| c.passed),
        failed,
    };
    let mut versions = BTreeMap::new();
    versions.insert("sbm-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let report = ExperimentReport {
        experiment: resolved.experiment,
        claim: resolved.experiment.claim().to_string(),
        config_hash: hash,
        seed: resolved.seed,
        workers: resolved.workers,
        versions,
        config: resolved,
        sample_sizes: ctx.samples,
        statistics: ctx.statistics,
        checks: ctx.checks,
        verdict,
        timing: Timing {
            started_unix: started,
            finished_unix: unix_now(),
            runtime_secs: clock.elapsed().as_secs_f64(),
            phases: ctx.phases,
        },
    };
    Ok(RunOutput {
        report,
        tables: ctx.tables,
    })
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Directory that holds the artifacts of one run.
pub fn run_dir(outdir: &Path, report: &ExperimentReport) -> PathBuf {
    outdir.join(report.experiment.name()).join(&report.config_hash)
}

/// Persist `report.json`, `config.json` and every table under
/// `outdir/<experiment>/<hash>/`.
pub fn write_artifacts(out: &RunOutput, outdir: &Path) -> Result<PathBuf> {
    let dir = run_dir(outdir, &out.report);
    std::fs::create_dir_all(&dir)?;
    for t in &out.tables {
        write_atomic(&dir.join(t.file_name()), &t.bytes)?;
    }
    write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(&out.report.config)?.as_bytes())?;
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&out.report)?.as_bytes())?;
    Ok(dir)
}

/// Per-level summary recomputed from a local-time CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub experiment: String,
    pub dim: usize,
    pub x_norm: f64,
    pub t: String,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

/// (experiment, dim, x_norm, t) of a row of `localtime.csv`.
type LevelKey = (String, usize, String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedSummary {
    pub experiment: ExperimentId,
    pub config_hash: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    /// Row count per CSV file.
    pub tables: BTreeMap<String, usize>,
    /// Recomputed from `localtime.csv`, when present.
    pub levels: Vec<LevelSummary>,
}

/// Rebuild the JSON summary of a finished run from its artifacts alone.
pub fn render_summary(dir: &Path) -> Result<RenderedSummary> {
    let text = std::fs::read_to_string(dir.join("report.json"))
        .map_err(|e| Error::Config(format!("no report.json in {}: {e}", dir.display())))?;
    let report: ExperimentReport = serde_json::from_str(&text)?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    let mut tables = BTreeMap::new();
    for p in &names {
        let mut r = csv::Reader::from_path(p)?;
        let n = r.records().count();
        tables.insert(p.file_name().expect("file").to_string_lossy().into_owned(), n);
    }
    let mut levels = Vec::new();
    let lt = dir.join("localtime.csv");
    if lt.exists() {
        let mut groups: BTreeMap<LevelKey, (f64, Vec<f64>)> = BTreeMap::new();
        for row in csv::Reader::from_path(&lt)?.deserialize::<LocalTimeRow>() {
            let row = row?;
            let key = (row.experiment.clone(), row.dim, format!("{:.12e}", row.x_norm), row.t.clone());
            groups.entry(key).or_insert_with(|| (row.x_norm, Vec::new())).1.push(row.value);
        }
        for ((experiment, dim, _, t), (x_norm, v)) in groups {
            let s = crate::stats::summarize(&v);
            levels.push(LevelSummary {
                experiment,
                dim,
                x_norm,
                t,
                n: s.n,
                mean: s.mean,
                var: s.var,
                se: s.se,
            });
        }
    }
    Ok(RenderedSummary {
        experiment: report.experiment,
        config_hash: report.config_hash,
        verdict: report.verdict,
        checks: report.checks,
        tables,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(j, format!("\"{}\"", id.name()));
            assert!(!id.claim().is_empty());
        }
        assert!(matches!("nope".parse::<ExperimentId>(), Err(Error::Config(_))));
    }

    #[test]
    fn defaults_resolve_and_hash_is_stable() {
        for id in ExperimentId::ALL {
            let c = ExperimentConfig::new(id);
            let r = c.resolve().unwrap();
            assert_eq!(r.params, id.default_params());
            assert_eq!(c.hash().unwrap(), r.hash().unwrap());
        }
    }

    #[test]
    fn hash_tracks_seed_and_workers() {
        let a = ExperimentConfig::new(ExperimentId::Rate);
        let mut b = a.clone();
        b.seed = 1;
        let mut c = a.clone();
        c.workers = 2;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::from_json(r#"{"schema_version":1,"experiment":"rate","bogus":1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let c = ExperimentConfig::new(ExperimentId::Rate).with_param("alphaz", serde_json::json!([0.5]));
        let e = c.resolve().unwrap_err();
        assert!(e.to_string().contains("alphaz"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"schema_version":1,"experiment":"nope"}"#).unwrap_err();
        assert!(e.to_string().contains("nope"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"schema_version":7,"experiment":"rate"}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn localtime_rows_serialize_with_schema_header() {
        let row = LocalTimeRow {
            experiment: "x".into(),
            dim: 3,
            n: 10,
            dt: 0.01,
            eps: None,
            x_norm: 0.1,
            t: horizon_label(Horizon::Infinite),
            replicate: 0,
            value: 1.0,
            aux1: Some(2.0),
            aux2: None,
        };
        let t = Table::from_records("localtime", &[row]).unwrap();
        let s = String::from_utf8(t.bytes).unwrap();
        assert!(s.starts_with("experiment,dim,N,dt,eps,x_norm,t,replicate,value,aux1,aux2\n"), "{s}");
        assert!(s.contains(",inf,"));
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("a.json");
        write_atomic(&p, b"{}").unwrap();
        let names: Vec<_> = std::fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        assert_eq!(std::fs::read(&p).unwrap(), b"{}");
    }
}
