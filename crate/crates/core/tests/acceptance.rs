//! One PASS/FAIL line per acceptance criterion, from default-config runs.
//!
//! Exits nonzero only when a criterion fails that is not listed in
//! `KNOWN_UNATTAINABLE`.

use std::collections::BTreeMap;
use std::process::ExitCode;

use sbm_core::experiments::{run_experiment, ExperimentConfig, ExperimentId, ExperimentReport};

/// Criteria that cannot hold as written, with the reason.
const KNOWN_UNATTAINABLE: &[(&str, &str)] = &[(
    "cumulant closed forms",
    "the 30-term partial sum of F at 0.2 misses F by its own tail, about 3.5e-6, so a 1e-6 gap is impossible",
)];

struct Line {
    name: String,
    ok: bool,
    detail: String,
}

struct Runs(BTreeMap<ExperimentId, ExperimentReport>);

impl Runs {
    fn get(&self, id: ExperimentId) -> Option<&ExperimentReport> {
        self.0.get(&id)
    }
}

/// All named checks pass; missing names count as failures.
fn all_pass(r: &ExperimentReport, names: &[&str]) -> (bool, Vec<String>) {
    let mut bad = Vec::new();
    for n in names {
        match r.check(n) {
            Some(c) if c.passed => {}
            Some(c) => bad.push(format!("{n} = {:?}", c.value)),
            None => bad.push(format!("{n} missing")),
        }
    }
    (bad.is_empty(), bad)
}

fn prefixed<'a>(r: &'a ExperimentReport, prefix: &str) -> Vec<&'a str> {
    r.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.name.as_str()).collect()
}

fn value(r: &ExperimentReport, name: &str) -> f64 {
    r.check(name).and_then(|c| c.value).unwrap_or(f64::NAN)
}

fn line(name: &str, ok: bool, detail: String) -> Line {
    Line {
        name: name.to_string(),
        ok,
        detail,
    }
}

fn missing(name: &str, id: ExperimentId) -> Line {
    line(name, false, format!("{id} did not run"))
}

fn criteria(runs: &Runs) -> Vec<Line> {
    use ExperimentId::*;
    let mut out = Vec::new();

    let name = "mean identities";
    match runs.get(KernelSuite) {
        Some(r) => {
            let names = prefixed(r, "mean_identity_");
            let (ok, bad) = all_pass(r, &names);
            let secs = r.timing.phases.get("mean_identities").copied().unwrap_or(f64::NAN);
            let worst = names.iter().map(|n| value(r, n)).fold(0.0, f64::max);
            out.push(line(
                name,
                ok && names.len() == 4 && secs < 30.0,
                format!("{} points, largest residual {worst:.2e}, {secs:.1} s {bad:?}", names.len()),
            ));
        }
        None => out.push(missing(name, KernelSuite)),
    }

    let name = "kernel inequality suite";
    match runs.get(KernelSuite) {
        Some(r) => {
            let (ok, bad) = all_pass(r, &["kernel_bounds_d3", "kernel_bounds_d2", "origin_inverse_distance"]);
            let secs = r.timing.runtime_secs;
            out.push(line(
                name,
                ok && secs < 60.0,
                format!(
                    "5×5×3 grid in d=2,3; origin value {:.5} ≤ √3; suite {secs:.1} s {bad:?}",
                    value(r, "origin_inverse_distance")
                ),
            ));
        }
        None => out.push(missing(name, KernelSuite)),
    }

    let name = "cumulant closed forms";
    match runs.get(CumulantXcheck) {
        Some(r) => {
            let (ok, bad) = all_pass(
                r,
                &[
                    "catalan_numbers",
                    "generating_function_gap_below_1e-6",
                    "constant_v2",
                    "constant_v3",
                    "cumulant_bound",
                ],
            );
            out.push(line(
                name,
                ok,
                format!(
                    "series gap {:.3e} (equals its tail to {:.1e}), worst bound ratio {:.3} {bad:?}",
                    value(r, "generating_function_gap_below_1e-6"),
                    value(r, "generating_function_series"),
                    value(r, "cumulant_bound")
                ),
            ));
        }
        None => out.push(missing(name, CumulantXcheck)),
    }

    let name = "radial PDE asymptotics";
    match runs.get(PdeAsymptotics) {
        Some(r) => {
            let (ok, bad) = all_pass(
                r,
                &[
                    "pde_converged",
                    "pde_first_order",
                    "pde_scaling",
                    "pde_second_order_band",
                    "pde_second_order_trend",
                ],
            );
            let secs = r.timing.runtime_secs;
            out.push(line(
                name,
                ok && secs < 120.0,
                format!(
                    "first order {:.4}, second-order ratio {:.3} at r = 1e-4, {secs:.1} s {bad:?}",
                    value(r, "pde_first_order"),
                    value(r, "pde_second_order_band")
                ),
            ));
        }
        None => out.push(missing(name, PdeAsymptotics)),
    }

    let name = "mass law and survival";
    match runs.get(ClusterSuite) {
        Some(r) => {
            let mut names = prefixed(r, "mass_martingale_t");
            names.extend(prefixed(r, "mass_variance_t"));
            names.extend(prefixed(r, "survival_t"));
            let (ok, bad) = all_pass(r, &names);
            let worst = names.iter().map(|n| value(r, n).abs()).fold(0.0, f64::max);
            let secs = r.timing.runtime_secs;
            out.push(line(
                name,
                ok && names.len() == 9 && secs < 600.0,
                format!("{} z-checks, largest |z| {worst:.2}, {secs:.1} s {bad:?}", names.len()),
            ));
        }
        None => out.push(missing(name, ClusterSuite)),
    }

    let name = "occupation moments against cumulants";
    match runs.get(CumulantXcheck) {
        Some(r) => {
            let names = ["occupation_variance_constant", "occupation_variance_inverse_distance"];
            let (ok, bad) = all_pass(r, &names);
            out.push(line(
                name,
                ok,
                format!("z = {:.2}, {:.2} {bad:?}", value(r, names[0]), value(r, names[1])),
            ));
        }
        None => out.push(missing(name, CumulantXcheck)),
    }

    let name = "local-time mean";
    match runs.get(Tanaka) {
        Some(r) => {
            let mut names = prefixed(r, "mollified_mean_");
            names.push("eps_sweep_monotone");
            let (ok, bad) = all_pass(r, &names);
            out.push(line(
                name,
                ok && names.len() == 5,
                format!("{} grid points and the ε-sweep {bad:?}", names.len() - 1),
            ));
        }
        None => out.push(missing(name, Tanaka)),
    }

    let name = "Tanaka martingale means";
    match runs.get(Tanaka) {
        Some(r) => {
            let names = ["tanaka_martingale_mean_d3", "tanaka_martingale_mean_d2"];
            let (ok, bad) = all_pass(r, &names);
            out.push(line(
                name,
                ok,
                format!("z = {:.2} (d=3), {:.2} (d=2) {bad:?}", value(r, names[0]), value(r, names[1])),
            ));
        }
        None => out.push(missing(name, Tanaka)),
    }

    let trends: [(&str, ExperimentId, Vec<&str>); 6] = [
        ("trend: d=3 variance slope", RenormD3, vec!["variance_slope"]),
        ("trend: skewness and kurtosis shrink", RenormD3, vec!["skewness_shrinks", "kurtosis_shrinks"]),
        ("trend: QV ratio toward 1", Tanaka, vec!["qv_ratio_trend"]),
        ("trend: d=2 residual stabilizes", RenormD2, vec!["d2_residual_stabilizes"]),
        (
            "trend: rate envelopes decay",
            Rate,
            vec!["rate_envelope_alpha0.25", "rate_envelope_alpha0.5", "rate_envelope_alpha0.99"],
        ),
        ("trend: bad-point blow-up frequency", BadPoint, vec!["blowup_frequency_decreasing"]),
    ];
    for (name, id, names) in trends {
        match runs.get(id) {
            Some(r) => {
                let (ok, bad) = all_pass(r, &names);
                let detail = names
                    .iter()
                    .map(|n| format!("{n} = {:.3}", value(r, n)))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push(line(name, ok, format!("{detail} {bad:?}")));
            }
            None => out.push(missing(name, id)),
        }
    }

    let name = "Laplace transform against the PDE";
    match runs.get(LaplaceXcheck) {
        Some(r) => {
            let names = prefixed(r, "laplace_x");
            let (ok, bad) = all_pass(r, &names);
            let worst = names.iter().map(|n| value(r, n).abs()).fold(0.0, f64::max);
            out.push(line(
                name,
                ok && names.len() == 4,
                format!("{} (|x|, λ) pairs, largest |z| {worst:.2} {bad:?}", names.len()),
            ));
        }
        None => out.push(missing(name, LaplaceXcheck)),
    }
    out
}

fn main() -> ExitCode {
    // `cargo test -- --list` and friends expect no work
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut runs = BTreeMap::new();
    let mut errors = Vec::new();
    for id in ExperimentId::ALL {
        let clock = std::time::Instant::now();
        match run_experiment(&ExperimentConfig::new(id), &mut |_| {}) {
            Ok(out) => {
                eprintln!("ran {id} in {:.1} s", clock.elapsed().as_secs_f64());
                runs.insert(id, out.report);
            }
            Err(e) => {
                eprintln!("{id} failed to run: {e}");
                errors.push(id);
            }
        }
    }
    let lines = criteria(&Runs(runs));
    let mut unexpected = 0;
    for l in &lines {
        let known = KNOWN_UNATTAINABLE.iter().find(|(n, _)| *n == l.name);
        println!("{} {}: {}", if l.ok { "PASS" } else { "FAIL" }, l.name, l.detail.trim_end_matches(" []"));
        if !l.ok {
            match known {
                Some((_, why)) => println!("     unattainable as stated: {why}"),
                None => unexpected += 1,
            }
        }
    }
    let passed = lines.iter().filter(|l| l.ok).count();
    println!("{passed}/{} acceptance lines pass", lines.len());
    if unexpected > 0 || !errors.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
