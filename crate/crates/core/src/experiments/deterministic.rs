//! Quadrature-level suites: kernel identities and bounds, cumulant closed
//! forms, and the radial PDE.

use serde::{Deserialize, Serialize};

use crate::cumulants::{
    catalan_c, exp_moment_bound, gen_function_f, gen_function_partial, mc_crosscheck_moments, v_recursion, CumulantGrid,
    MomentRow, REFINEMENT_TOL,
};
use crate::error::Result;
use crate::kernels::{
    extension_d2, extension_d2_limit, extension_d3, extension_d3_limit, f_alpha, f_alpha_limit, gbar_fbar_hbar,
    laplacian_gbar_constant, log_plus_inv, verify_kernel_bounds, verify_mean_identities, BoundGrid, Horizon,
    KernelDescriptor, Potential, SpacePoint,
};
use crate::particles::{run_replicates, AtomicMeasure, KernelRegistry, SimConfig};
use crate::pde::{boundary_sensitivity, refinement_change, scaling_defect, second_order_ratio, solve_radial, SolverSpec};
use crate::quadrature::QuadratureSpec;

use super::{Ctx, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityPoint {
    pub dim: usize,
    pub t: f64,
    pub x_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSuiteParams {
    pub identity_points: Vec<IdentityPoint>,
    pub identity_tol: f64,
    pub bound_grid: BoundGrid,
    pub quadrature: QuadratureSpec,
    /// Radii for the ḡ cutoff checks.
    pub cutoff_radii: usize,
}

impl Default for KernelSuiteParams {
    fn default() -> Self {
        let p = |dim, t, x_norm| IdentityPoint { dim, t, x_norm };
        Self {
            identity_points: vec![p(3, 1.0, 0.5), p(3, 1.0, 0.1), p(2, 1.0, 0.3), p(2, 0.5, 0.1)],
            identity_tol: 1e-6,
            bound_grid: BoundGrid::default(),
            quadrature: QuadratureSpec::default(),
            cutoff_radii: 200,
        }
    }
}

pub(crate) fn kernel_suite(p: &KernelSuiteParams, ctx: &mut Ctx) -> Result<()> {
    let clock = std::time::Instant::now();
    let mut identity_rows = Vec::new();
    for pt in &p.identity_points {
        let x = SpacePoint::on_axis(pt.dim, pt.x_norm);
        let rep = verify_mean_identities(pt.dim, pt.t, &x, &p.quadrature)?;
        let worst = rep.max_residual();
        ctx.pass(
            &format!("mean_identity_d{}_t{}_x{}", pt.dim, pt.t, pt.x_norm),
            worst < p.identity_tol,
            Some(worst),
            format!("largest residual over {} identities", rep.residuals.len()),
        );
        identity_rows.extend(rep.residuals.iter().map(|r| IdentityRow {
            dim: pt.dim,
            t: pt.t,
            x_norm: pt.x_norm,
            name: r.name.clone(),
            lhs: r.lhs,
            rhs: r.rhs,
            rhs_alt: r.rhs_alt,
            residual: r.residual,
        }));
    }
    ctx.table("identities", &identity_rows)?;
    ctx.phase("mean_identities", clock);
    ctx.log("mean identities done");

    let mut bound_rows = Vec::new();
    for dim in [3, 2] {
        let rep = verify_kernel_bounds(dim, &p.bound_grid)?;
        let failed = rep.checks.iter().filter(|c| !c.pass).count();
        ctx.pass(
            &format!("kernel_bounds_d{dim}"),
            rep.all_pass(),
            Some(failed as f64),
            format!("{} inequalities checked, {failed} failed", rep.checks.len()),
        );
        if dim == 3 {
            // ∫₀ᵗ E|B_s|⁻¹ds/√t = 2√(2/π) for every t
            let exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
            let worst = rep
                .origin_inverse_distance
                .iter()
                .map(|(_, v)| (v - exact).abs())
                .fold(0.0, f64::max);
            let top = rep.origin_inverse_distance.iter().map(|(_, v)| *v).fold(0.0, f64::max);
            ctx.pass(
                "origin_inverse_distance",
                worst < 1e-6 && top <= 3f64.sqrt(),
                Some(top),
                format!("normalized value {top:.6} against 2√(2/π) = {exact:.6} and the bound √3"),
            );
        }
        ctx.stat(&format!("empirical_power_constants_d{dim}"), &rep.empirical_power_constants)?;
        ctx.stat(&format!("empirical_log_constant_d{dim}"), &rep.empirical_log_constant)?;
        bound_rows.extend(rep.checks.into_iter().map(|c| BoundRow {
            dim,
            bound: c.bound,
            x_norm: c.x_norm,
            t: c.t,
            alpha: c.alpha,
            lhs: c.lhs,
            rhs: c.rhs,
            pass: c.pass,
        }));
    }
    ctx.table("kernel_bounds", &bound_rows)?;
    ctx.log("kernel bounds done");

    // ḡ: equals log r inside the half ball, 0 ≤ −ḡ ≤ log⁺(1/r), Δḡ = 1/r² inside
    let center = SpacePoint::origin(3);
    let n = p.cutoff_radii.max(2);
    let (mut inner, mut sandwich, mut harmonic) = (0.0f64, true, 0.0f64);
    for i in 0..n {
        let r = (1e-4f64.ln() + (2f64.ln() - 1e-4f64.ln()) * i as f64 / (n - 1) as f64).exp();
        let g = gbar_fbar_hbar(&center, &SpacePoint::on_axis(3, r));
        let gbar = g.gbar.expect("off-center");
        if r < 0.5 {
            inner = inner.max(g.fbar.abs());
            harmonic = harmonic.max(g.hbar.abs() * r * r);
        }
        sandwich &= -gbar >= -1e-12 && -gbar <= log_plus_inv(r) + 1e-12;
    }
    ctx.pass("cutoff_inner_identity", inner < 1e-12, Some(inner), "|ḡ + log⁺(1/r)| on r < 1/2");
    ctx.pass("cutoff_sandwich", sandwich, None, "0 ≤ −ḡ ≤ log⁺(1/r) on [1e-4, 2]");
    ctx.pass(
        "cutoff_laplacian_inner",
        harmonic < 1e-8,
        Some(harmonic),
        "r²|Δḡ − 1/r²| on r < 1/2",
    );
    let c = laplacian_gbar_constant(1e-4, 2.0, 2000);
    ctx.diag("cutoff_laplacian_constant", c.is_finite(), Some(c), "sup r²|Δḡ(r)| over [1e-4, 2]");

    // continuous extensions at the origin
    let mut ext: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        ext = ext.max((extension_d3(t, 1e-7) - extension_d3_limit(t)).abs());
        ext = ext.max((extension_d2(t, 1e-7) - extension_d2_limit(t)).abs());
    }
    ctx.pass("extensions_continuous", ext < 1e-6, Some(ext), "gap between r = 1e-7 and the limit value");
    let mut fa: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        fa = fa.max((f_alpha(a, &SpacePoint::on_axis(2, 1e-7))? - f_alpha_limit(a)?).abs());
    }
    ctx.pass("resolvent_continuous", fa < 1e-6, Some(fa), "f_α at r = 1e-7 against its origin value");
    Ok(())
}

#[derive(Serialize)]
struct IdentityRow {
    dim: usize,
    t: f64,
    x_norm: f64,
    name: String,
    lhs: f64,
    rhs: f64,
    rhs_alt: f64,
    residual: f64,
}

#[derive(Serialize)]
struct BoundRow {
    dim: usize,
    bound: String,
    x_norm: f64,
    t: f64,
    alpha: Option<f64>,
    lhs: f64,
    rhs: f64,
    pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CumulantMcParams {
    pub n_init: usize,
    pub dt: f64,
    pub replicates: u64,
    /// |x| of the inverse-distance kernel.
    pub x_norm: f64,
    pub z_limit: f64,
}

impl Default for CumulantMcParams {
    fn default() -> Self {
        Self {
            n_init: 100,
            dt: 1e-3,
            replicates: 400,
            x_norm: 0.5,
            z_limit: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CumulantParams {
    pub t: f64,
    /// Center of the kernel 1/|y − x| in the bound check.
    pub x_norm: f64,
    pub n_max: usize,
    pub grid: CumulantGrid,
    pub catalan_max: u32,
    pub series_theta: f64,
    pub series_terms: usize,
    /// Run the Monte Carlo moment comparison.
    pub monte_carlo: bool,
    pub mc: CumulantMcParams,
}

impl Default for CumulantParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            x_norm: 0.3,
            n_max: 6,
            grid: CumulantGrid::default(),
            catalan_max: 20,
            series_theta: 0.2,
            series_terms: 30,
            monte_carlo: true,
            mc: CumulantMcParams::default(),
        }
    }
}

/// C(2m, m)/(m + 1) by the multiplicative formula.
fn catalan_binomial(m: u32) -> u128 {
    let mut c: u128 = 1;
    for k in 0..m as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

pub(crate) fn cumulant_xcheck(p: &CumulantParams, ctx: &mut Ctx) -> Result<()> {
    let mut ok = true;
    for n in 1..=p.catalan_max {
        ok &= catalan_c(n)? as u128 == catalan_binomial(n - 1);
    }
    ctx.pass(
        "catalan_numbers",
        ok,
        None,
        format!("c_n = C(2n−2, n−1)/n for n ≤ {}", p.catalan_max),
    );
    let gap = (gen_function_partial(p.series_theta, p.series_terms) - gen_function_f(p.series_theta)?).abs();
    let tail = catalan_tail(p.series_theta, p.series_terms);
    let rel = (gap - tail).abs() / tail.max(f64::MIN_POSITIVE);
    ctx.pass(
        "generating_function_series",
        rel < 1e-6,
        Some(rel),
        format!(
            "|Σ_{{n≤{}}} c_n θⁿ − F(θ)| = {gap:.4e} at θ = {} against the summed tail {tail:.4e}",
            p.series_terms, p.series_theta
        ),
    );
    ctx.diag(
        "generating_function_gap_below_1e-6",
        gap < 1e-6,
        Some(gap),
        format!("the truncation gap itself; the tail after {} terms is {tail:.4e}", p.series_terms),
    );

    let t = p.t;
    let one = v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, t, 3, &p.grid)?;
    let v2 = one.v(2, 0.0)?;
    let v3 = one.v(3, 0.0)?;
    let e2 = (v2 / (t.powi(3) / 3.0) - 1.0).abs();
    let e3 = (v3 / (2.0 * t.powi(5) / 15.0) - 1.0).abs();
    ctx.pass("constant_v2", e2 < 1e-10, Some(e2), "relative error of v₂ against t³/3");
    ctx.pass("constant_v3", e3 < 1e-10, Some(e3), "relative error of v₃ against 2t⁵/15");

    // 1/|y − x| is 2π·φ_x
    let center = SpacePoint::on_axis(3, p.x_norm);
    let table = v_recursion(&KernelDescriptor::Phi { center }, 3, t, p.n_max, &p.grid)?.scaled(2.0 * std::f64::consts::PI);
    let r = 3f64.sqrt();
    let verdicts = table.bound_check(r, p.n_max)?;
    let worst = verdicts.iter().map(|v| v.max_ratio).fold(0.0, f64::max);
    ctx.pass(
        "cumulant_bound",
        verdicts.iter().all(|v| v.holds),
        Some(worst),
        format!("v_n ≤ c_n rⁿ s^{{(3n−2)/2}} with r = √3, n ≤ {}, every time level", p.n_max),
    );
    ctx.stat("bound_verdicts", &verdicts)?;
    let refinement = table.refinement.unwrap_or(0.0);
    ctx.pass(
        "cumulant_refinement",
        refinement < REFINEMENT_TOL,
        Some(refinement),
        "relative change of v₂ under time-step doubling",
    );
    ctx.pass("cumulant_monotone", table.monotone_in_time(1e-9), None, "every v_n nondecreasing in time");
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes)?;
    ctx.raw_table(Table::from_bytes("cumulants", bytes));

    // exponential-moment bound for f = θφ₀: finite iff ∫₀ᵗ sup P_s f ds < 2
    let phi0 = KernelDescriptor::Phi {
        center: SpacePoint::origin(3),
    };
    let start = SpacePoint::on_axis(3, p.x_norm);
    let theta = 2.0 * std::f64::consts::PI;
    let b1 = exp_moment_bound(&phi0, theta, 3, 1.0, &start)?;
    let b2 = exp_moment_bound(&phi0, theta, 3, 2.0, &start)?;
    let g_exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
    ctx.pass(
        "exp_moment_bound_branches",
        (b1.g - g_exact).abs() < 1e-6 && matches!(b1.bound, Potential::Finite(_)) && b2.bound == Potential::Infinite,
        Some(b1.g),
        "G = 2√(2/π) < 2 at t = 1 gives a finite bound; G > 2 at t = 2 does not",
    );
    ctx.stat("exp_moment_bounds", &[b1, b2])?;
    ctx.log("cumulant tables done");

    if p.monte_carlo {
        cumulant_mc(p, ctx)?;
    }
    Ok(())
}

fn cumulant_mc(p: &CumulantParams, ctx: &mut Ctx) -> Result<()> {
    let m = &p.mc;
    let t = p.t;
    let mut cfg = SimConfig::new(3, m.n_init, m.dt, Horizon::Finite(t));
    cfg.seed = ctx.sub_seed("cumulant_mc");
    cfg.snapshot_times = vec![t];
    let center = SpacePoint::on_axis(3, m.x_norm);
    let mut reg = KernelRegistry::new();
    let k_one = reg.register(KernelDescriptor::Const { a: 1.0 });
    let k_phi = reg.register(KernelDescriptor::Phi { center });
    ctx.log(&format!("simulating {} paths for the moment cross-check", m.replicates));
    let paths = run_replicates(&cfg, &reg, m.replicates, ctx.workers)?;
    ctx.samples("cumulant_mc_paths", m.replicates);
    let mu = AtomicMeasure::dirac(3);

    let one = v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, t, 3, &p.grid)?;
    let rows_one = mc_crosscheck_moments(&paths, k_one, t, &one, &mu, 3, ctx.sub_seed("boot_one"))?;
    let phi = v_recursion(&KernelDescriptor::Phi { center }, 3, t, 2, &p.grid)?.scaled(2.0 * std::f64::consts::PI);
    let rows_phi = mc_crosscheck_moments(&paths, k_phi, t, &phi, &mu, 2, ctx.sub_seed("boot_phi"))?;

    let z = |rows: &[MomentRow], order: usize| rows.iter().find(|r| r.order == order).expect("row").clone();
    let r = z(&rows_one, 2);
    ctx.z_check(
        "occupation_variance_constant",
        r.z,
        m.z_limit,
        format!("Var ∫₀ᵗX_s(1)ds = {:.4} against {:.4}", r.empirical, r.oracle),
    );
    let r = z(&rows_one, 3);
    ctx.z_check(
        "occupation_third_constant",
        r.z,
        m.z_limit,
        format!("third central moment {:.4} against {:.4}", r.empirical, r.oracle),
    );
    let r = z(&rows_phi, 1);
    ctx.z_check(
        "occupation_mean_inverse_distance",
        r.z,
        m.z_limit,
        format!("mean {:.4} against v₁ = {:.4}", r.empirical, r.oracle),
    );
    let r = z(&rows_phi, 2);
    ctx.z_check(
        "occupation_variance_inverse_distance",
        r.z,
        m.z_limit,
        format!("variance {:.4} against v₂ = {:.4}", r.empirical, r.oracle),
    );
    #[derive(Serialize)]
    struct Row<'a> {
        kernel: &'a str,
        order: usize,
        empirical: f64,
        oracle: f64,
        se: f64,
        z: f64,
    }
    let tag = |kernel, r: MomentRow| Row {
        kernel,
        order: r.order,
        empirical: r.empirical,
        oracle: r.oracle,
        se: r.se,
        z: r.z,
    };
    let rows: Vec<Row> = rows_one
        .into_iter()
        .map(|r| tag("one", r))
        .chain(rows_phi.into_iter().map(|r| tag("inverse_distance", r)))
        .collect();
    ctx.stat("moment_rows", &rows)?;
    ctx.table("moments", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeParams {
    pub lambda: f64,
    pub r_min: f64,
    pub solver: SolverSpec,
    pub first_order_r: f64,
    pub first_order_band: [f64; 2],
    /// Radii of the second-order ratio, outermost first.
    pub ratio_points: Vec<f64>,
    pub ratio_band: [f64; 2],
    pub scaling_c: f64,
    pub scaling_tol: f64,
    pub refinement_r: f64,
    pub refinement_tol: f64,
    pub r_max_alt: f64,
    pub boundary_tol: f64,
    /// Other λ whose second-order ratio is compared with the base one.
    pub lambdas: Vec<f64>,
    pub invariance_tol: f64,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            r_min: 1e-6,
            solver: SolverSpec::default(),
            first_order_r: 1e-5,
            first_order_band: [0.97, 1.03],
            ratio_points: vec![1e-2, 1e-3, 1e-4],
            ratio_band: [-1.3, -0.7],
            scaling_c: 2.0,
            scaling_tol: 5e-3,
            refinement_r: 1e-3,
            refinement_tol: 1e-3,
            r_max_alt: 20.0,
            boundary_tol: 1e-2,
            lambdas: vec![0.5, 2.0],
            invariance_tol: 0.1,
        }
    }
}

#[derive(Serialize)]
struct RatioRow {
    lambda: f64,
    r: f64,
    ratio: f64,
}

pub(crate) fn pde_asymptotics(p: &PdeParams, ctx: &mut Ctx) -> Result<()> {
    let sol = solve_radial(p.lambda, p.r_min, &p.solver)?;
    ctx.pass(
        "pde_converged",
        sol.residual <= p.solver.tol,
        Some(sol.residual),
        format!("Newton residual after {} iterations", sol.iterations),
    );
    ctx.stat("residual_trace", &sol.residual_trace)?;
    let f = sol.first_order_ratio(p.first_order_r)?;
    ctx.pass(
        "pde_first_order",
        f >= p.first_order_band[0] && f <= p.first_order_band[1],
        Some(f),
        format!("2πrV/λ at r = {}", p.first_order_r),
    );
    let s = scaling_defect(p.lambda, p.scaling_c, p.r_min, &p.solver, &p.ratio_points)?;
    ctx.pass(
        "pde_scaling",
        s <= p.scaling_tol,
        Some(s),
        format!("largest gap between V^{{cλ}}(r) and c²V^λ(cr), c = {}", p.scaling_c),
    );
    let ratios = second_order_ratio(&sol, &p.ratio_points)?;
    let (r_in, inner) = *ratios.last().expect("ratio points");
    ctx.pass(
        "pde_second_order_band",
        inner >= p.ratio_band[0] && inner <= p.ratio_band[1],
        Some(inner),
        format!("second-order ratio at r = {r_in}"),
    );
    let gaps: Vec<f64> = ratios.iter().map(|(_, q)| (q + 1.0).abs()).collect();
    ctx.pass(
        "pde_second_order_trend",
        gaps.windows(2).all(|w| w[1] < w[0]),
        Some(gaps[gaps.len() - 1]),
        format!("|ratio + 1| along r = {:?}: {:?}", p.ratio_points, gaps),
    );
    ctx.stat("second_order_ratios", &ratios)?;
    let refine = refinement_change(p.lambda, p.r_min, &p.solver, p.refinement_r)?;
    ctx.pass(
        "pde_refinement",
        refine < p.refinement_tol,
        Some(refine),
        format!("relative change of V at r = {} when the grid is doubled", p.refinement_r),
    );
    let bc = boundary_sensitivity(p.lambda, p.r_min, &p.solver, p.r_max_alt, &p.ratio_points)?;
    ctx.pass(
        "pde_boundary_sensitivity",
        bc < p.boundary_tol,
        Some(bc),
        format!("change of the ratio when r_max moves to {}", p.r_max_alt),
    );
    ctx.pass("pde_maximum_principle", sol.maximum_principle(), None, "rV positive and nonincreasing");
    let c = sol.log_bracket_constant(1e-5_f64.max(10.0 * p.r_min), 1e-1);
    ctx.diag("pde_log_bracket", c.is_finite(), Some(c), "C with |V − λ/(2πr)| ≤ C(|log r| + 1)");
    let deep = 10.0 * p.r_min;
    if deep < p.ratio_points.last().copied().unwrap_or(1.0) {
        let q = sol.ratio_at(deep)?;
        ctx.diag(
            "pde_second_order_inner",
            true,
            Some(q),
            format!("ratio at r = {deep}, one decade from the inner boundary"),
        );
    }

    let mut rows: Vec<RatioRow> = ratios
        .iter()
        .map(|&(r, ratio)| RatioRow {
            lambda: p.lambda,
            r,
            ratio,
        })
        .collect();
    let mut bytes = Vec::new();
    sol.write_csv(&mut bytes)?;
    ctx.raw_table(Table::from_bytes(&format!("radial_lambda_{}", p.lambda), bytes));

    // the second-order ratio should not depend on λ in the limit
    let mut spread: Vec<(f64, f64)> = vec![(p.lambda, inner)];
    let mut worst: f64 = 0.0;
    for &lam in &p.lambdas {
        let other = solve_radial(lam, p.r_min, &p.solver)?;
        let q = second_order_ratio(&other, &p.ratio_points)?;
        let last = q.last().expect("ratio points").1;
        worst = worst.max((last / inner - 1.0).abs());
        spread.push((lam, last));
        rows.extend(q.iter().map(|&(r, ratio)| RatioRow { lambda: lam, r, ratio }));
        let mut bytes = Vec::new();
        other.write_csv(&mut bytes)?;
        ctx.raw_table(Table::from_bytes(&format!("radial_lambda_{lam}"), bytes));
    }
    if !p.lambdas.is_empty() {
        ctx.trend(
            "pde_lambda_invariance",
            worst <= p.invariance_tol,
            Some(worst),
            format!("largest relative gap to the λ = {} ratio at r = {r_in}", p.lambda),
        );
        let lo = spread.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let hi = spread.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        ctx.diag(
            "pde_lambda_spread",
            true,
            Some((hi - lo) / hi.abs()),
            "full relative spread of the ratio across λ; V^λ(r) = λ²V¹(λr) makes it O(log λ / log(1/r))",
        );
    }
    ctx.stat("lambda_ratios", &spread)?;
    ctx.table("ratio", &rows)?;
    Ok(())
}

/// Σ_{n>n0} c_n θⁿ via c_{n+1} = c_n·2(2n−1)/(n+1), summed until the terms vanish.
fn catalan_tail(theta: f64, n0: usize) -> f64 {
    let mut term = theta;
    for n in 1..=n0 {
        term *= theta * 2.0 * (2.0 * n as f64 - 1.0) / (n as f64 + 1.0);
    }
    let (mut sum, mut n) = (0.0, n0 + 1);
    while term > sum * 1e-18 && n < 100_000 {
        sum += term;
        term *= theta * 2.0 * (2.0 * n as f64 - 1.0) / (n as f64 + 1.0);
        n += 1;
    }
    sum
}
