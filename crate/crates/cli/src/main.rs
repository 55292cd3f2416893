use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sbm_core::experiments::{
    render_summary, run_experiment, write_artifacts, write_atomic, ExperimentConfig, ExperimentId, ExperimentReport,
    Tier,
};
use sbm_core::Error;
use serde_json::json;

const EXIT_FAIL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "sbm-lab", version, about = "Simulation and verification lab for super-Brownian local times")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (any id; cluster_suite by default).
    Simulate(RunArgs),
    /// Run a local-time experiment (tanaka by default).
    Localtime(RunArgs),
    /// Run the cumulant cross-check.
    Cumulants(RunArgs),
    /// Solve the radial equation and check its asymptotics.
    Pde {
        #[command(flatten)]
        run: RunArgs,
        /// λ of the reference solve.
        #[arg(long)]
        lambda: Option<f64>,
        /// Inner radius of the solver domain.
        #[arg(long)]
        rmin: Option<f64>,
    },
    /// Run the deterministic suites: kernel bounds, cumulant closed forms, PDE.
    Verify {
        /// Config files overriding the defaults of individual suites.
        #[arg(long = "config", value_name = "PATH")]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render summaries from existing run directories.
    Report {
        /// Directories of the form <outdir>/<experiment>/<hash>.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment id; taken from the config file when omitted.
    experiment: Option<ExperimentId>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Artifact root; defaults to $OUTDIR, then ./runs.
    #[arg(long, value_name = "PATH")]
    outdir: Option<PathBuf>,
    /// Only print the final verdict lines.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn outdir(&self) -> PathBuf {
        self.outdir
            .clone()
            .or_else(|| std::env::var_os("OUTDIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
    }
}

fn experiment_listing() -> String {
    let mut s = String::from("Experiments:\n");
    for id in ExperimentId::ALL {
        s.push_str(&format!("  {:<16} {}\n", id.name(), id.claim()));
    }
    s.push_str("\nExit codes: 0 all pass-tier checks hold, 2 a pass-tier check failed, 3 usage or config error.");
    s
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_help(experiment_listing());
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_FAIL,
            })
        }
    }
}

fn dispatch(command: Command) -> sbm_core::Result<u8> {
    use ExperimentId::*;
    match command {
        Command::Simulate(a) => run_single(a, ClusterSuite, &ExperimentId::ALL, |_| Ok(())),
        Command::Localtime(a) => run_single(
            a,
            Tanaka,
            &[Tanaka, RenormD3, RenormD2, Rate, BadPoint, LaplaceXcheck],
            |_| Ok(()),
        ),
        Command::Cumulants(a) => run_single(a, CumulantXcheck, &[CumulantXcheck], |_| Ok(())),
        Command::Pde { run, lambda, rmin } => run_single(run, PdeAsymptotics, &[PdeAsymptotics], |cfg| {
            if let Some(l) = lambda {
                set_param(cfg, "lambda", json!(l))?;
            }
            if let Some(r) = rmin {
                set_param(cfg, "r_min", json!(r))?;
            }
            Ok(())
        }),
        Command::Verify { configs, common } => verify(&configs, &common),
        Command::Report { dirs, quiet } => report(&dirs, quiet),
    }
}

fn set_param(cfg: &mut ExperimentConfig, key: &str, value: serde_json::Value) -> sbm_core::Result<()> {
    if !(cfg.params.is_object() || cfg.params.is_null()) {
        return Err(Error::Config("params must be an object".into()));
    }
    *cfg = cfg.clone().with_param(key, value);
    Ok(())
}

fn run_single(
    a: RunArgs,
    default: ExperimentId,
    allowed: &[ExperimentId],
    adjust: impl FnOnce(&mut ExperimentConfig) -> sbm_core::Result<()>,
) -> sbm_core::Result<u8> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(a.experiment.unwrap_or(default)),
    };
    if let Some(id) = a.experiment {
        if id != cfg.experiment {
            return Err(Error::Config(format!(
                "experiment {id} on the command line but {} in the config",
                cfg.experiment
            )));
        }
    }
    if !allowed.contains(&cfg.experiment) {
        let names: Vec<&str> = allowed.iter().map(|i| i.name()).collect();
        return Err(Error::Config(format!(
            "{} is not available here; choose one of {}",
            cfg.experiment,
            names.join(", ")
        )));
    }
    a.common.apply(&mut cfg);
    adjust(&mut cfg)?;
    let report = execute(&cfg, &a.common)?;
    Ok(report.exit_code() as u8)
}

fn execute(cfg: &ExperimentConfig, common: &Common) -> sbm_core::Result<ExperimentReport> {
    let quiet = common.quiet;
    let mut log = |m: &str| {
        if !quiet {
            eprintln!("[{}] {m}", cfg.experiment);
        }
    };
    let out = run_experiment(cfg, &mut log)?;
    let dir = write_artifacts(&out, &common.outdir())?;
    print_report(&out.report, &dir, quiet);
    Ok(out.report)
}

fn print_report(r: &ExperimentReport, dir: &Path, quiet: bool) {
    if !quiet {
        for c in &r.checks {
            let tier = match c.tier {
                Tier::Pass => "pass",
                Tier::Trend => "trend",
                Tier::Diagnostic => "diag",
            };
            let value = c.value.map(|v| format!(" [{v:.6}]")).unwrap_or_default();
            println!(
                "  {tier:<5} {} {}{value}  {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }
    println!(
        "{}: {} (trends {}), {:.1} s, {}",
        r.experiment,
        if r.verdict.pass { "PASS" } else { "FAIL" },
        if r.verdict.trends_hold { "hold" } else { "do not hold" },
        r.timing.runtime_secs,
        dir.display()
    );
}

fn verify(paths: &[PathBuf], common: &Common) -> sbm_core::Result<u8> {
    use ExperimentId::*;
    let mut cfgs = vec![
        ExperimentConfig::new(KernelSuite),
        ExperimentConfig::new(CumulantXcheck).with_param("monte_carlo", json!(false)),
        ExperimentConfig::new(PdeAsymptotics),
    ];
    for p in paths {
        let c = ExperimentConfig::load(p)?;
        match cfgs.iter_mut().find(|d| d.experiment == c.experiment) {
            Some(slot) => *slot = c,
            None => {
                return Err(Error::Config(format!(
                    "{}: verify runs kernel_suite, cumulant_xcheck and pde_asymptotics, not {}",
                    p.display(),
                    c.experiment
                )))
            }
        }
    }
    let mut code = 0;
    for cfg in &mut cfgs {
        common.apply(cfg);
        let r = execute(cfg, common)?;
        code = code.max(r.exit_code() as u8);
    }
    println!("verify: {}", if code == 0 { "PASS" } else { "FAIL" });
    Ok(code)
}

fn report(dirs: &[PathBuf], quiet: bool) -> sbm_core::Result<u8> {
    let mut code = 0;
    for dir in dirs {
        let s = render_summary(dir)?;
        let text = serde_json::to_string_pretty(&s)?;
        write_atomic(&dir.join("summary.json"), text.as_bytes())?;
        if quiet {
            println!("{}: {}", s.experiment, if s.verdict.pass { "PASS" } else { "FAIL" });
        } else {
            println!("{text}");
        }
        if !s.verdict.pass {
            code = EXIT_FAIL;
        }
    }
    Ok(code)
}
