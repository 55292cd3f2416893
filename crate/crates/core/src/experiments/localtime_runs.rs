//! Monte Carlo experiments on local times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    expect_about, expect_about_time_integrated, heat_radial, potential_radial, Horizon, KernelDescriptor, SpacePoint,
    C_D2, TWO_C_SQ,
};
use crate::localtime::{
    bad_point_normalizers, bad_point_stat, mollified_mean, register_tanaka, renorm_stat_d2, renorm_stat_d3,
    tanaka_decompose, tanaka_kernel, tanaka_local_time, Atom, AtomicMeasure, RateSequence,
};
use crate::particles::{run_replicates, Extinction, GradedStart, KernelId, KernelRegistry, PathRecord, SimConfig};
use crate::pde::{laplace_crosscheck, solve_radial, SolverSpec};
use crate::quadrature::{adaptive, QuadratureSpec};
use crate::stats::{
    excess_kurtosis, independence_diag, ks_normality, mean, skewness, summarize, variance, variance_regression, z_score,
};

use super::{horizon_label, Ctx, LocalTimeRow};

fn simulate(ctx: &mut Ctx, label: &str, cfg: &SimConfig, reg: &KernelRegistry, n: u64) -> Result<Vec<PathRecord>> {
    ctx.log(&format!(
        "{label}: {n} paths, d={}, N={}, dt={}, {} kernels",
        cfg.dim,
        cfg.n_init,
        cfg.dt,
        reg.len()
    ));
    let paths = run_replicates(cfg, reg, n, ctx.workers)?;
    ctx.samples(label, n);
    Ok(paths)
}

/// X₀(φ) + M(φ) at the end of the run: L̂_∞ for extinct paths, and its
/// conditional mean given the state at the cap for censored ones.
fn total_local_time_d3(path: &PathRecord, id: KernelId) -> f64 {
    path.initial[id.0] + path.terminal.martingale[id.0]
}

/// Resolves singularities down to |x| ≈ 0.003 near the starting atoms.
fn graded() -> Option<GradedStart> {
    Some(GradedStart {
        steps: 20,
        ratio: 0.02,
        h_min: 1e-7,
    })
}

fn censored_fraction(paths: &[PathRecord]) -> f64 {
    paths.iter().filter(|p| matches!(p.end, Extinction::Censored(_))).count() as f64 / paths.len() as f64
}

fn row(experiment: &str, cfg: &SimConfig, eps: Option<f64>, x_norm: f64, t: Horizon, replicate: u64, value: f64) -> LocalTimeRow {
    LocalTimeRow {
        experiment: experiment.to_string(),
        dim: cfg.dim,
        n: cfg.n_init,
        dt: cfg.dt,
        eps,
        x_norm,
        t: horizon_label(t),
        replicate,
        value,
        aux1: None,
        aux2: None,
    }
}

/// Var L_t^x = ∫₀ᵗ P_s(q_{t−s}(·−x)²)(0) ds in d=3.
fn local_time_variance_d3(t: f64, r: f64) -> Result<f64> {
    let spec = QuadratureSpec {
        tol: 1e-9,
        ..Default::default()
    };
    let failed = std::cell::Cell::new(None);
    let g = |s: f64| {
        let h = t - s;
        if s <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        match expect_about(3, s, r, &|rho: f64| potential_radial(3, h, rho).powi(2), &[], &spec) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e.to_string()));
                0.0
            }
        }
    };
    let v = adaptive(&g, 0.0, t, 1e-8)?;
    match failed.into_inner() {
        Some(e) => Err(Error::Domain(e)),
        None => Ok(v),
    }
}

/// q_t(r) by direct time quadrature of the heat kernel.
fn potential_by_quadrature(dim: usize, t: f64, r: f64) -> Result<f64> {
    adaptive(&|s: f64| if s <= 0.0 { 0.0 } else { heat_radial(dim, s, r) }, 0.0, t, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanPoint {
    pub dim: usize,
    pub x_norm: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TanakaParams {
    pub n_init: usize,
    pub dt: f64,
    pub t: f64,
    pub replicates: u64,
    /// (d, |x|, ε) points for the mollified-mean comparison.
    pub mean_grid: Vec<MeanPoint>,
    pub sweep_x: f64,
    /// Bandwidths of the ε-sweep, decreasing.
    pub sweep_eps: Vec<f64>,
    pub martingale_x_d3: f64,
    pub martingale_x_d2: f64,
    pub martingale_eps: f64,
    /// Points of the quadratic-variation ratio, approaching the origin.
    pub qv_x: Vec<f64>,
    /// Points where Var L̂ is compared with the exact variance.
    pub variance_x: Vec<f64>,
    pub z_limit: f64,
    /// Geometric substeps at the start; None keeps the uniform grid.
    pub graded_start: Option<GradedStart>,
}

impl Default for TanakaParams {
    fn default() -> Self {
        let m = |dim, x_norm, eps| MeanPoint { dim, x_norm, eps };
        Self {
            graded_start: graded(),
            n_init: 100,
            dt: 1e-3,
            t: 1.0,
            replicates: 400,
            mean_grid: vec![m(3, 0.3, 0.02), m(3, 0.5, 0.05), m(2, 0.3, 0.02), m(2, 0.5, 0.05)],
            sweep_x: 0.3,
            sweep_eps: vec![0.1, 0.05, 0.02, 0.01],
            martingale_x_d3: 0.4,
            martingale_x_d2: 0.3,
            martingale_eps: 0.005,
            qv_x: vec![0.1, 0.03, 0.01],
            variance_x: vec![0.2, 0.1, 0.05],
            z_limit: 3.0,
        }
    }
}

pub(crate) fn tanaka(p: &TanakaParams, ctx: &mut Ctx) -> Result<()> {
    if p.sweep_eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("sweep_eps must be decreasing".into()));
    }
    let t = p.t;
    let th = Horizon::Finite(t);
    let spec = QuadratureSpec {
        tol: 1e-10,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();

    for dim in [3, 2] {
        let mut cfg = SimConfig::new(dim, p.n_init, p.dt, th);
        cfg.seed = ctx.sub_seed(&format!("tanaka_d{dim}"));
        cfg.graded_start = p.graded_start;
        cfg.snapshot_times = vec![t];
        let mut reg = KernelRegistry::new();
        let grid: Vec<MeanPoint> = p.mean_grid.iter().copied().filter(|m| m.dim == dim).collect();
        for m in &grid {
            reg.register(KernelDescriptor::Mollified {
                center: SpacePoint::on_axis(dim, m.x_norm),
                eps: m.eps,
            });
        }
        let xm = SpacePoint::on_axis(dim, if dim == 3 { p.martingale_x_d3 } else { p.martingale_x_d2 });
        register_tanaka(&mut reg, &xm, p.martingale_eps);
        let xs = SpacePoint::on_axis(3, p.sweep_x);
        if dim == 3 {
            reg.register(tanaka_kernel(&xs));
            for &eps in &p.sweep_eps {
                reg.register(KernelDescriptor::Mollified { center: xs, eps });
            }
            for &r in p.qv_x.iter().chain(&p.variance_x) {
                reg.register(tanaka_kernel(&SpacePoint::on_axis(3, r)));
            }
        }
        let paths = simulate(ctx, &format!("tanaka_d{dim}_paths"), &cfg, &reg, p.replicates)?;
        let name = "tanaka";

        // mollified estimator against the smoothed-potential quadrature
        for m in &grid {
            let x = SpacePoint::on_axis(dim, m.x_norm);
            let id = reg.find(&KernelDescriptor::Mollified { center: x, eps: m.eps }).expect("registered");
            let v: Vec<f64> = paths.iter().map(|q| q.occupation_at(id, t)).collect::<Result<_>>()?;
            let s = summarize(&v);
            let eps = m.eps;
            let oracle =
                expect_about_time_integrated(dim, t, m.x_norm, &|rho: f64| heat_radial(dim, eps, rho), &[], &spec)?;
            let closed = mollified_mean(dim, t, m.x_norm, m.eps);
            ctx.z_check(
                &format!("mollified_mean_d{dim}_x{}_eps{}", m.x_norm, m.eps),
                z_score(s.mean, oracle, s.se),
                p.z_limit,
                format!(
                    "mean {:.5} ± {:.5} against quadrature {:.5} (closed form {:.5})",
                    s.mean, s.se, oracle, closed
                ),
            );
            summaries.push(("mollified", dim, m.x_norm, Some(m.eps), s, oracle));
            rows.extend(paths.iter().zip(&v).map(|(q, v)| row(name, &cfg, Some(eps), m.x_norm, th, q.replicate, *v)));
        }

        // Tanaka decomposition: the implied and the branching martingale
        let dec: Vec<_> = paths
            .iter()
            .map(|q| tanaka_decompose(q, &xm, t, p.martingale_eps))
            .collect::<Result<_>>()?;
        let worst = dec.iter().map(|d| d.identity_residual().abs()).fold(0.0, f64::max);
        ctx.pass(
            &format!("tanaka_identity_d{dim}"),
            worst < 1e-9,
            Some(worst),
            "largest pathwise residual of the decomposition",
        );
        let implied: Vec<f64> = dec.iter().map(|d| d.implied_martingale).collect();
        let branching: Vec<f64> = dec.iter().map(|d| d.branching_martingale).collect();
        let (si, sb) = (summarize(&implied), summarize(&branching));
        ctx.z_check(
            &format!("tanaka_martingale_mean_d{dim}"),
            z_score(si.mean, 0.0, si.se),
            p.z_limit,
            format!("implied martingale mean {:.5} ± {:.5} at |x| = {}", si.mean, si.se, xm.norm()),
        );
        ctx.z_check(
            &format!("branching_martingale_mean_d{dim}"),
            z_score(sb.mean, 0.0, sb.se),
            p.z_limit,
            format!("branching martingale mean {:.5} ± {:.5}", sb.mean, sb.se),
        );
        let tan: Vec<f64> = paths
            .iter()
            .map(|q| tanaka_local_time(q, &xm, th).map(|e| e.value))
            .collect::<Result<_>>()?;
        let st = summarize(&tan);
        let q = potential_by_quadrature(dim, t, xm.norm())?;
        ctx.z_check(
            &format!("tanaka_mean_d{dim}"),
            z_score(st.mean, q, st.se),
            p.z_limit,
            format!("Tanaka estimate {:.5} ± {:.5} against q_t(x) = {:.5}", st.mean, st.se, q),
        );
        summaries.push(("tanaka", dim, xm.norm(), None, st, q));
        rows.extend(paths.iter().zip(&tan).zip(&dec).map(|((q, v), d)| LocalTimeRow {
            aux1: Some(d.implied_martingale),
            aux2: Some(d.branching_martingale),
            ..row(name, &cfg, None, xm.norm(), th, q.replicate, *v)
        }));

        if dim == 3 {
            // both sides of the d=3 log identity
            let lhs: Vec<f64> = dec.iter().map(|d| d.half_inv_sq_occupation.expect("registered")).collect();
            let rhs: Vec<f64> = dec.iter().map(|d| d.log_side.expect("registered")).collect();
            let r = xm.norm();
            let oracle = 0.5 * expect_about_time_integrated(3, t, r, &|rho: f64| 1.0 / (rho * rho), &[], &spec)?;
            let floor_hits: u64 = dec.iter().map(|d| d.floor_hits).sum();
            for (side, v) in [("inverse_square", &lhs), ("log", &rhs)] {
                let s = summarize(v);
                let z = z_score(s.mean, oracle, s.se);
                ctx.diag(
                    &format!("log_identity_{side}_side"),
                    z.abs() <= p.z_limit,
                    Some(z),
                    format!("mean {:.5} ± {:.5} against {:.5}; floor hits {floor_hits}", s.mean, s.se, oracle),
                );
            }
            tanaka_sweep(p, ctx, &paths, &reg, &xs, &cfg, &mut rows)?;
            qv_and_variance(p, ctx, &paths, &reg, &cfg, &mut rows)?;
        }
    }
    ctx.stat("mean_summaries", &summaries)?;
    ctx.table("localtime", &rows)?;
    Ok(())
}

fn tanaka_sweep(
    p: &TanakaParams,
    ctx: &mut Ctx,
    paths: &[PathRecord],
    reg: &KernelRegistry,
    xs: &SpacePoint,
    cfg: &SimConfig,
    rows: &mut Vec<LocalTimeRow>,
) -> Result<()> {
    let t = p.t;
    let th = Horizon::Finite(t);
    let tan: Vec<f64> = paths
        .iter()
        .map(|q| tanaka_local_time(q, xs, th).map(|e| e.value))
        .collect::<Result<_>>()?;
    let mut bias = Vec::new();
    for &eps in &p.sweep_eps {
        let id = reg.find(&KernelDescriptor::Mollified { center: *xs, eps }).expect("registered");
        let v: Vec<f64> = paths.iter().map(|q| q.occupation_at(id, t)).collect::<Result<_>>()?;
        // paired against the unbiased Tanaka estimate on the same paths
        let d: Vec<f64> = v.iter().zip(&tan).map(|(a, b)| a - b).collect();
        let s = summarize(&d);
        let exact = mollified_mean(3, t, xs.norm(), eps) - potential_radial(3, t, xs.norm());
        bias.push((eps, s.mean, s.se, exact));
        rows.extend(paths.iter().zip(&v).map(|(q, v)| row("tanaka_sweep", cfg, Some(eps), xs.norm(), th, q.replicate, *v)));
    }
    let mags: Vec<f64> = bias.iter().map(|b| b.1.abs()).collect();
    ctx.pass(
        "eps_sweep_monotone",
        mags.windows(2).all(|w| w[1] < w[0]),
        Some(mags[mags.len() - 1]),
        format!("|bias| along ε = {:?}: {:?}", p.sweep_eps, mags),
    );
    for (eps, m, se, exact) in &bias {
        ctx.diag(
            &format!("eps_sweep_bias_eps{eps}"),
            z_score(*m, *exact, *se).abs() <= p.z_limit,
            Some(*m),
            format!("paired bias {m:.5} ± {se:.5} against q_ε-type bias {exact:.5}"),
        );
    }
    ctx.stat("eps_sweep", &bias)?;
    Ok(())
}

fn qv_and_variance(
    p: &TanakaParams,
    ctx: &mut Ctx,
    paths: &[PathRecord],
    reg: &KernelRegistry,
    cfg: &SimConfig,
    rows: &mut Vec<LocalTimeRow>,
) -> Result<()> {
    let t = p.t;
    let th = Horizon::Finite(t);
    let mut ratios = Vec::new();
    for &r in &p.qv_x {
        let x = SpacePoint::on_axis(3, r);
        let id = reg.find(&tanaka_kernel(&x)).expect("registered");
        let qv: Vec<f64> = paths.iter().map(|q| q.at(t).map(|f| f.realized_qv[id.0])).collect::<Result<_>>()?;
        let s = summarize(&qv);
        let target = TWO_C_SQ * (1.0 / r).ln();
        ratios.push((r, s.mean / target, s.se / target));
        rows.extend(paths.iter().zip(&qv).map(|(q, v)| LocalTimeRow {
            aux1: Some(v / target),
            ..row("tanaka_qv", cfg, None, r, th, q.replicate, *v)
        }));
    }
    let gaps: Vec<f64> = ratios.iter().map(|r| (r.1 - 1.0).abs()).collect();
    ctx.trend(
        "qv_ratio_trend",
        gaps.windows(2).all(|w| w[1] < w[0]),
        Some(ratios[ratios.len() - 1].1),
        format!("realized QV over 2c²log(1/|x|) at |x| = {:?}: {:?}", p.qv_x, ratios),
    );
    ctx.stat("qv_ratios", &ratios)?;

    let mut var_rows = Vec::new();
    for &r in &p.variance_x {
        let x = SpacePoint::on_axis(3, r);
        let v: Vec<f64> = paths
            .iter()
            .map(|q| tanaka_local_time(q, &x, th).map(|e| e.value))
            .collect::<Result<_>>()?;
        let exact = local_time_variance_d3(t, r)?;
        let emp = variance(&v);
        var_rows.push((r, emp, exact));
        ctx.diag(
            &format!("tanaka_variance_x{r}"),
            (emp / exact - 1.0).abs() < 0.25,
            Some(emp / exact),
            format!("Var L̂ = {emp:.4} against the exact {exact:.4}; structure below N^(−1/2) is smoothed"),
        );
    }
    ctx.stat("tanaka_variance", &var_rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormD3Params {
    pub n_init: usize,
    pub dt: f64,
    /// Cap of the run-to-extinction horizon.
    pub t_cap: f64,
    pub replicates: u64,
    /// Levels |x|, outermost first.
    pub x_norms: Vec<f64>,
    /// Accepted band for slope/(2c²).
    pub slope_band: [f64; 2],
    pub bootstrap: usize,
    pub z_var_x: f64,
    pub z_var_band: [f64; 2],
    pub snapshot_times: [f64; 2],
    pub permutations: usize,
    /// Geometric substeps at the start; None keeps the uniform grid.
    pub graded_start: Option<GradedStart>,
}

impl Default for RenormD3Params {
    fn default() -> Self {
        Self {
            graded_start: graded(),
            n_init: 100,
            dt: 1e-3,
            t_cap: 10.0,
            replicates: 400,
            x_norms: vec![0.2, 0.1, 0.05, 0.02],
            slope_band: [0.5, 2.0],
            bootstrap: 1000,
            z_var_x: 0.05,
            z_var_band: [0.4, 2.5],
            snapshot_times: [0.5, 1.0],
            permutations: 10_000,
        }
    }
}

pub(crate) fn renorm_d3(p: &RenormD3Params, ctx: &mut Ctx) -> Result<()> {
    let mut cfg = SimConfig::new(3, p.n_init, p.dt, Horizon::Infinite);
    cfg.t_cap = p.t_cap;
    cfg.seed = ctx.sub_seed("renorm_d3");
        cfg.graded_start = p.graded_start;
    cfg.snapshot_times = p.snapshot_times.to_vec();
    let mut reg = KernelRegistry::new();
    let points: Vec<SpacePoint> = p.x_norms.iter().map(|r| SpacePoint::on_axis(3, *r)).collect();
    let ids: Vec<KernelId> = points.iter().map(|x| reg.register(tanaka_kernel(x))).collect();
    if !points.iter().any(|x| (x.norm() - p.z_var_x).abs() < 1e-15) {
        return Err(Error::Config("z_var_x must be one of x_norms".into()));
    }
    let paths = simulate(ctx, "renorm_d3_paths", &cfg, &reg, p.replicates)?;
    let censored = censored_fraction(&paths);
    ctx.diag("censored_fraction", censored < 0.5, Some(censored), format!("paths alive at the cap t = {}", p.t_cap));

    let mut l_levels = Vec::new();
    let mut z_levels = Vec::new();
    let mut rows = Vec::new();
    let mut level_stats = Vec::new();
    for (x, id) in points.iter().zip(&ids) {
        let l: Vec<f64> = paths.iter().map(|q| total_local_time_d3(q, *id)).collect();
        let z: Vec<f64> = l.iter().map(|v| renorm_stat_d3(*v, x)).collect::<Result<_>>()?;
        let ks = ks_normality(&z).ok();
        level_stats.push(serde_json::json!({
            "x_norm": x.norm(),
            "mean_l": mean(&l),
            "var_l": variance(&l),
            "mean_z": mean(&z),
            "var_z": variance(&z),
            "skewness": skewness(&z),
            "excess_kurtosis": excess_kurtosis(&z),
            "ks": ks,
        }));
        if let Some(ks) = ks {
            ctx.diag(
                &format!("ks_normality_x{}", x.norm()),
                ks.p_value > 0.01,
                Some(ks.p_value),
                format!("KS D = {:.4} against N(0, 1)", ks.d),
            );
        }
        rows.extend(paths.iter().zip(l.iter().zip(&z)).map(|(q, (lv, zv))| LocalTimeRow {
            aux1: Some(*zv),
            aux2: Some(q.end.time()),
            ..row("renorm_d3", &cfg, None, x.norm(), Horizon::Infinite, q.replicate, *lv)
        }));
        l_levels.push(l);
        z_levels.push(z);
    }
    ctx.stat("levels", &level_stats)?;

    let logs: Vec<f64> = p.x_norms.iter().map(|r| (1.0 / r).ln()).collect();
    let reg_out = variance_regression(&logs, &l_levels, true, p.bootstrap, ctx.sub_seed("slope_boot"))?;
    let ratio = reg_out.slope / TWO_C_SQ;
    ctx.trend(
        "variance_slope",
        ratio >= p.slope_band[0] && ratio <= p.slope_band[1],
        Some(ratio),
        format!(
            "slope {:.5} (95% CI {:.5}..{:.5}) against 2c² = {:.5}",
            reg_out.slope, reg_out.ci.0, reg_out.ci.1, TWO_C_SQ
        ),
    );
    ctx.stat("regression", &reg_out)?;

    let first = &z_levels[0];
    let last = &z_levels[z_levels.len() - 1];
    let (s0, s1) = (skewness(first).abs(), skewness(last).abs());
    let (k0, k1) = (excess_kurtosis(first).abs(), excess_kurtosis(last).abs());
    ctx.trend(
        "skewness_shrinks",
        s1 < s0,
        Some(s1),
        format!("|skewness| of Z from {s0:.3} at the outer level to {s1:.3} at the inner one"),
    );
    ctx.trend(
        "kurtosis_shrinks",
        k1 < k0,
        Some(k1),
        format!("|excess kurtosis| of Z from {k0:.3} to {k1:.3}"),
    );

    let k = p.x_norms.iter().position(|r| (r - p.z_var_x).abs() < 1e-15).expect("checked");
    let vz = variance(&z_levels[k]);
    ctx.trend(
        "z_variance_band",
        vz >= p.z_var_band[0] && vz <= p.z_var_band[1],
        Some(vz),
        format!("Var Z at |x| = {}", p.z_var_x),
    );

    let mass = |t: f64| -> Result<Vec<f64>> { paths.iter().map(|q| q.mass_at(t)).collect() };
    let functionals = vec![
        (format!("mass_t{}", p.snapshot_times[0]), mass(p.snapshot_times[0])?),
        (format!("mass_t{}", p.snapshot_times[1]), mass(p.snapshot_times[1])?),
        ("total_occupation".to_string(), paths.iter().map(|q| q.mass_occupation).collect()),
    ];
    ctx.log("independence diagnostics");
    let ind = independence_diag(&z_levels[k], &functionals, p.permutations, ctx.sub_seed("perm"))?;
    for r in &ind {
        ctx.diag(
            &format!("independence_{}", r.name),
            r.pearson_p > 0.01 && r.dcor_p > 0.01,
            Some(r.dcor_p),
            format!(
                "Pearson {:.3} (p {:.4}), distance correlation {:.3} (p {:.4})",
                r.pearson, r.pearson_p, r.dcor, r.dcor_p
            ),
        );
    }
    ctx.stat("independence", &ind)?;
    #[derive(Serialize)]
    struct FRow {
        replicate: u64,
        mass_a: f64,
        mass_b: f64,
        total_occupation: f64,
        censored: bool,
    }
    let frows: Vec<FRow> = paths
        .iter()
        .enumerate()
        .map(|(i, q)| FRow {
            replicate: q.replicate,
            mass_a: functionals[0].1[i],
            mass_b: functionals[1].1[i],
            total_occupation: q.mass_occupation,
            censored: matches!(q.end, Extinction::Censored(_)),
        })
        .collect();
    ctx.table("functionals", &frows)?;
    ctx.table("localtime", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormD2Params {
    pub n_init: usize,
    pub dt: f64,
    pub t: f64,
    pub replicates: u64,
    /// Levels |x|, outermost first.
    pub x_norms: Vec<f64>,
    pub z_limit: f64,
    /// Geometric substeps at the start; None keeps the uniform grid.
    pub graded_start: Option<GradedStart>,
}

impl Default for RenormD2Params {
    fn default() -> Self {
        Self {
            graded_start: graded(),
            n_init: 1000,
            dt: 2.5e-4,
            t: 1.0,
            replicates: 50,
            x_norms: vec![0.2, 0.1, 0.05, 0.025],
            z_limit: 3.0,
        }
    }
}

pub(crate) fn renorm_d2(p: &RenormD2Params, ctx: &mut Ctx) -> Result<()> {
    if p.x_norms.len() < 3 {
        return Err(Error::Config("renorm_d2 needs at least 3 levels".into()));
    }
    let t = p.t;
    let th = Horizon::Finite(t);
    let mut cfg = SimConfig::new(2, p.n_init, p.dt, th);
    cfg.seed = ctx.sub_seed("renorm_d2");
        cfg.graded_start = p.graded_start;
    cfg.snapshot_times = vec![t];
    let mut reg = KernelRegistry::new();
    let points: Vec<SpacePoint> = p.x_norms.iter().map(|r| SpacePoint::on_axis(2, *r)).collect();
    for x in &points {
        reg.register(tanaka_kernel(x));
    }
    let paths = simulate(ctx, "renorm_d2_paths", &cfg, &reg, p.replicates)?;
    let mut resid = Vec::new();
    let mut rows = Vec::new();
    for x in &points {
        let y: Vec<f64> = paths
            .iter()
            .map(|q| tanaka_local_time(q, x, th).and_then(|e| renorm_stat_d2(e.value, x)))
            .collect::<Result<_>>()?;
        let r = x.norm();
        let oracle = potential_by_quadrature(2, t, r)? - C_D2 * (1.0 / r).ln();
        let s = summarize(&y);
        ctx.z_check(
            &format!("residual_mean_x{r}"),
            z_score(s.mean, oracle, s.se),
            p.z_limit,
            format!("mean of L̂ − (1/π)log(1/|x|) = {:.4} ± {:.4} against {:.4}", s.mean, s.se, oracle),
        );
        rows.extend(paths.iter().zip(&y).map(|(q, v)| LocalTimeRow {
            aux1: Some(*v),
            ..row("renorm_d2", &cfg, None, r, th, q.replicate, v + C_D2 * (1.0 / r).ln())
        }));
        resid.push(y);
    }
    // paired increments between successive levels on the same path
    let inc: Vec<f64> = resid
        .windows(2)
        .map(|w| mean(&w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()).collect::<Vec<_>>()))
        .collect();
    ctx.trend(
        "d2_residual_stabilizes",
        inc.windows(2).all(|w| w[1] < w[0]),
        Some(inc[inc.len() - 1]),
        format!("mean |Δ residual| between successive levels: {inc:?}"),
    );
    ctx.stat("paired_increments", &inc)?;
    ctx.table("localtime", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateParams {
    pub n_init: usize,
    pub dt: f64,
    pub t: f64,
    pub replicates: u64,
    pub alphas: Vec<f64>,
    /// Levels |x_n| = 2^{−n} for n in this inclusive range.
    pub n_range: [u32; 2],
    /// Fraction of paths whose envelope must decay.
    pub decay_fraction: f64,
    /// Geometric substeps at the start; None keeps the uniform grid.
    pub graded_start: Option<GradedStart>,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            graded_start: graded(),
            n_init: 100,
            dt: 1e-3,
            t: 1.0,
            replicates: 200,
            alphas: vec![0.25, 0.5, 0.99],
            n_range: [2, 6],
            decay_fraction: 0.8,
        }
    }
}

#[derive(Serialize)]
struct RateRow {
    replicate: u64,
    alpha: f64,
    n: u32,
    x_norm: f64,
    value: f64,
    envelope: f64,
}

pub(crate) fn rate(p: &RateParams, ctx: &mut Ctx) -> Result<()> {
    let t = p.t;
    let th = Horizon::Finite(t);
    let ns: Vec<u32> = (p.n_range[0]..=p.n_range[1]).collect();
    if ns.len() < 2 {
        return Err(Error::Config("rate needs at least two levels".into()));
    }
    let x_norms: Vec<f64> = ns.iter().map(|n| 2f64.powi(-(*n as i32))).collect();
    let mut cfg = SimConfig::new(3, p.n_init, p.dt, th);
    cfg.seed = ctx.sub_seed("rate");
        cfg.graded_start = p.graded_start;
    cfg.snapshot_times = vec![t];
    let mut reg = KernelRegistry::new();
    let points: Vec<SpacePoint> = x_norms.iter().map(|r| SpacePoint::on_axis(3, *r)).collect();
    for x in &points {
        reg.register(tanaka_kernel(x));
    }
    let paths = simulate(ctx, "rate_paths", &cfg, &reg, p.replicates)?;
    let mut lrows = Vec::new();
    let local: Vec<Vec<f64>> = paths
        .iter()
        .map(|q| {
            points
                .iter()
                .map(|x| tanaka_local_time(q, x, th).map(|e| e.value))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    for (q, l) in paths.iter().zip(&local) {
        for (r, v) in x_norms.iter().zip(l) {
            lrows.push(row("rate", &cfg, None, *r, th, q.replicate, *v));
        }
    }
    let mut rows = Vec::new();
    let mut per_alpha = Vec::new();
    for &alpha in &p.alphas {
        let seqs: Vec<RateSequence> = local
            .iter()
            .map(|l| RateSequence::new(alpha, &x_norms, l))
            .collect::<Result<_>>()?;
        let frac = seqs.iter().filter(|s| s.decays()).count() as f64 / seqs.len() as f64;
        let log_decay = mean(&seqs.iter().map(|s| s.log_decay()).collect::<Vec<_>>());
        ctx.trend(
            &format!("rate_envelope_alpha{alpha}"),
            frac >= p.decay_fraction,
            Some(frac),
            format!("fraction of paths whose envelope decays; mean log decay {log_decay:.3}"),
        );
        per_alpha.push((alpha, frac, log_decay));
        for (q, s) in paths.iter().zip(&seqs) {
            for i in 0..ns.len() {
                rows.push(RateRow {
                    replicate: q.replicate,
                    alpha,
                    n: ns[i],
                    x_norm: x_norms[i],
                    value: s.values[i],
                    envelope: s.envelope[i],
                });
            }
        }
    }
    let mut sorted = per_alpha.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    ctx.trend(
        "rate_log_decay_ordering",
        sorted.windows(2).all(|w| w[1].2 < w[0].2),
        None,
        format!("mean log decay falls as α grows: {sorted:?}"),
    );
    ctx.stat("per_alpha", &per_alpha)?;
    ctx.table("rate", &rows)?;
    ctx.table("localtime", &lrows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BadPointParams {
    pub n_init: usize,
    pub dt: f64,
    pub t: f64,
    pub replicates: u64,
    pub atoms: Vec<Atom>,
    /// Index of the atom that the points approach.
    pub atom_index: usize,
    /// Unit direction of approach.
    pub direction: [f64; 3],
    /// Points x₀ + 2^{−n}·direction for n in this inclusive range.
    pub n_range: [u32; 2],
    /// Geometric substeps at the start; None keeps the uniform grid.
    pub graded_start: Option<GradedStart>,
}

impl Default for BadPointParams {
    fn default() -> Self {
        Self {
            graded_start: graded(),
            n_init: 200,
            dt: 1e-3,
            t: 1.0,
            replicates: 200,
            atoms: vec![
                Atom {
                    mass: 0.5,
                    at: SpacePoint::origin(3),
                },
                Atom {
                    mass: 0.5,
                    at: SpacePoint::on_axis(3, 1.0),
                },
            ],
            atom_index: 0,
            direction: [0.0, 1.0, 0.0],
            n_range: [1, 6],
        }
    }
}

pub(crate) fn bad_point(p: &BadPointParams, ctx: &mut Ctx) -> Result<()> {
    let t = p.t;
    let th = Horizon::Finite(t);
    let mu = AtomicMeasure::new(p.atoms.clone())?;
    let x0 = mu
        .atoms()
        .get(p.atom_index)
        .ok_or_else(|| Error::Config(format!("atom_index {} out of range", p.atom_index)))?
        .at;
    if mu.dim() != 3 {
        return Err(Error::Config("bad-point experiments are in d=3".into()));
    }
    let norm = p.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Config("direction must be nonzero".into()));
    }
    let ns: Vec<u32> = (p.n_range[0]..=p.n_range[1]).collect();
    let points: Vec<SpacePoint> = ns
        .iter()
        .map(|n| {
            let h = 2f64.powi(-(*n as i32)) / norm;
            let c = x0.coords();
            SpacePoint::new(&[c[0] + h * p.direction[0], c[1] + h * p.direction[1], c[2] + h * p.direction[2]])
        })
        .collect::<Result<_>>()?;

    // with a single atom the part-(a) statistic reduces to the d=3 one
    let single = AtomicMeasure::dirac(3);
    let probe = SpacePoint::on_axis(3, 0.1);
    let a = bad_point_stat(1.0, &bad_point_normalizers(&single, &probe)?)?;
    let b = renorm_stat_d3(1.0, &probe)?;
    ctx.pass(
        "single_atom_reduction",
        (a - b).abs() < 1e-12,
        Some((a - b).abs()),
        "δ₀ normalizers reproduce the d=3 statistic",
    );

    let mut cfg = SimConfig::new(3, p.n_init, p.dt, th);
    cfg.seed = ctx.sub_seed("bad_point");
        cfg.graded_start = p.graded_start;
    cfg.snapshot_times = vec![t];
    cfg.initial_measure = Some(mu.clone());
    let mut reg = KernelRegistry::new();
    for x in &points {
        reg.register(tanaka_kernel(x));
    }
    let paths = simulate(ctx, "bad_point_paths", &cfg, &reg, p.replicates)?;
    let mut freqs = Vec::new();
    let mut rows = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut cauchy = Vec::new();
    let mut part_a = Vec::new();
    for x in &points {
        let nz = bad_point_normalizers(&mu, x)?;
        let l: Vec<f64> = paths
            .iter()
            .map(|q| tanaka_local_time(q, x, th).map(|e| e.value))
            .collect::<Result<_>>()?;
        let below = l.iter().filter(|v| **v < 0.5 * nz.newtonian).count() as f64 / l.len() as f64;
        let stat: Vec<f64> = l.iter().map(|v| bad_point_stat(*v, &nz)).collect::<Result<_>>()?;
        let centred: Vec<f64> = l.iter().map(|v| v - nz.newtonian).collect();
        if let Some(pv) = &prev {
            cauchy.push(mean(&pv.iter().zip(&centred).map(|(a, b)| (b - a).abs()).collect::<Vec<_>>()));
        }
        let r = x.dist(&x0);
        freqs.push((r, below));
        part_a.push((r, mean(&stat), variance(&stat)));
        rows.extend(paths.iter().zip(l.iter().zip(&stat)).map(|(q, (lv, sv))| LocalTimeRow {
            aux1: Some(*sv),
            aux2: Some(nz.newtonian),
            ..row("bad_point", &cfg, None, r, th, q.replicate, *lv)
        }));
        prev = Some(centred);
    }
    let f0 = freqs[0].1;
    let f1 = freqs[freqs.len() - 1].1;
    ctx.trend(
        "blowup_frequency_decreasing",
        f1 < f0,
        Some(f1),
        format!("P̂(L̂ < μ(φ)/2) along the approach: {freqs:?}"),
    );
    ctx.diag(
        "part_a_statistic",
        part_a.iter().all(|s| s.1.is_finite()),
        Some(part_a[part_a.len() - 1].2),
        format!("(|x − x₀|, mean, variance) of (L̂ − μ(φ))/(2c²Λ)^(1/2): {part_a:?}"),
    );
    ctx.diag(
        "cauchy_proxy",
        cauchy.iter().all(|c| c.is_finite()),
        cauchy.last().copied(),
        format!("mean |Δ(L̂ − μ(φ))| between successive points: {cauchy:?}"),
    );
    ctx.stat("blowup_frequencies", &freqs)?;
    ctx.stat("part_a", &part_a)?;
    ctx.stat("cauchy_proxy", &cauchy)?;
    ctx.table("localtime", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaplaceParams {
    pub n_init: usize,
    pub dt: f64,
    pub t_cap: f64,
    pub replicates: u64,
    pub x_norms: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub r_min: f64,
    pub solver: SolverSpec,
    pub z_limit: f64,
}

impl Default for LaplaceParams {
    fn default() -> Self {
        Self {
            n_init: 50,
            dt: 5e-3,
            t_cap: 50.0,
            replicates: 2000,
            x_norms: vec![0.5, 0.3],
            lambdas: vec![0.5, 1.0],
            r_min: 1e-6,
            solver: SolverSpec::default(),
            z_limit: 3.0,
        }
    }
}

pub(crate) fn laplace_xcheck(p: &LaplaceParams, ctx: &mut Ctx) -> Result<()> {
    let mut cfg = SimConfig::new(3, p.n_init, p.dt, Horizon::Infinite);
    cfg.t_cap = p.t_cap;
    cfg.seed = ctx.sub_seed("laplace");
    let mut reg = KernelRegistry::new();
    let points: Vec<SpacePoint> = p.x_norms.iter().map(|r| SpacePoint::on_axis(3, *r)).collect();
    let ids: Vec<KernelId> = points.iter().map(|x| reg.register(tanaka_kernel(x))).collect();
    let paths = simulate(ctx, "laplace_paths", &cfg, &reg, p.replicates)?;
    let censored = censored_fraction(&paths);
    let samples: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| paths.iter().map(|q| total_local_time_d3(q, *id)).collect())
        .collect();
    let mut rows = Vec::new();
    for (x, l) in points.iter().zip(&samples) {
        rows.extend(paths.iter().zip(l).map(|(q, v)| LocalTimeRow {
            aux1: Some(q.end.time()),
            aux2: Some(matches!(q.end, Extinction::Censored(_)) as u8 as f64),
            ..row("laplace_xcheck", &cfg, None, x.norm(), Horizon::Infinite, q.replicate, *v)
        }));
    }
    ctx.diag(
        "censored_fraction",
        censored <= 0.1,
        Some(censored),
        format!("paths alive at t = {}; completed by X₀(φ) + M", p.t_cap),
    );
    let mut all = Vec::new();
    for &lambda in &p.lambdas {
        let sol = solve_radial(lambda, p.r_min, &p.solver)?;
        let rep = laplace_crosscheck(&sol, &p.x_norms, &samples, censored)?;
        for r in &rep.rows {
            ctx.z_check(
                &format!("laplace_x{}_lambda{}", r.x_norm, r.lambda),
                r.z,
                p.z_limit,
                format!(
                    "−log E e^(−λL̂) = {:.4} ± {:.4} against V = {:.4} (first order {:.4})",
                    r.mc, r.se, r.pde, r.linear
                ),
            );
        }
        all.push(rep);
    }
    ctx.stat("laplace", &all)?;
    ctx.table("localtime", &rows)?;
    let flat: Vec<_> = all.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    ctx.table("laplace", &flat)?;
    Ok(())
}
