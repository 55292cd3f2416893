//! Calibration of the particle system: mass law, spatial means and
//! single-ancestor clusters.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{expect_about, expect_about_time_integrated, Horizon, KernelDescriptor, SpacePoint};
use crate::particles::{
    cluster_survival_exact, parallel_map, run_replicates, sample_cluster, simulate_mass, survival_exact, KernelRegistry,
    SimConfig,
};
use crate::quadrature::QuadratureSpec;
use crate::stats::{bootstrap_se, mean, proportion_z, summarize, variance, z_score};

use super::Ctx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassParams {
    pub n_init: usize,
    pub dt: f64,
    pub replicates: u64,
    pub times: Vec<f64>,
}

impl Default for MassParams {
    fn default() -> Self {
        Self {
            n_init: 2000,
            dt: 1e-4,
            replicates: 400,
            times: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialParams {
    pub n_init: usize,
    pub dt: f64,
    pub replicates: u64,
    pub t: f64,
    pub x_norm: f64,
    /// Time parameter of the heat-kernel test function.
    pub heat_time: f64,
}

impl Default for SpatialParams {
    fn default() -> Self {
        Self {
            n_init: 100,
            dt: 1e-3,
            replicates: 400,
            t: 1.0,
            x_norm: 0.3,
            heat_time: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSampleParams {
    pub n_init: usize,
    pub dt: f64,
    /// Survival threshold δ.
    pub delta: f64,
    pub samples: u64,
    pub budget: u64,
    /// Times at which sup L̂ is read, increasing.
    pub times: Vec<f64>,
    /// Spacing of the 7-point grid around the ancestor.
    pub grid_radius: f64,
    pub eps: f64,
}

impl Default for ClusterSampleParams {
    fn default() -> Self {
        Self {
            n_init: 100,
            dt: 1e-3,
            delta: 0.1,
            samples: 200,
            budget: 100_000,
            times: vec![0.02, 0.05, 0.1],
            grid_radius: 0.05,
            eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    pub mass: MassParams,
    pub spatial: SpatialParams,
    pub cluster: ClusterSampleParams,
    pub z_limit: f64,
    pub bootstrap: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            mass: MassParams::default(),
            spatial: SpatialParams::default(),
            cluster: ClusterSampleParams::default(),
            z_limit: 3.0,
            bootstrap: 1000,
        }
    }
}

#[derive(Serialize)]
struct MassRow {
    replicate: u64,
    t: f64,
    mass: f64,
    occupation: f64,
}

#[derive(Serialize)]
struct ClusterRow {
    replicate: u64,
    rejections: u64,
    t: f64,
    sup_local_time: f64,
}

pub(crate) fn cluster_suite(p: &ClusterParams, ctx: &mut Ctx) -> Result<()> {
    mass_law(p, ctx)?;
    spatial_means(p, ctx)?;
    clusters(p, ctx)
}

fn mass_law(p: &ClusterParams, ctx: &mut Ctx) -> Result<()> {
    let m = &p.mass;
    let t_end = m.times.iter().copied().fold(1.0, f64::max);
    let mut cfg = SimConfig::new(3, m.n_init, m.dt, Horizon::Finite(t_end));
    cfg.seed = ctx.sub_seed("mass");
    cfg.snapshot_times = m.times.clone();
    if !cfg.snapshot_times.contains(&1.0) {
        cfg.snapshot_times.push(1.0);
    }
    ctx.log(&format!("mass chain: {} replicates at N = {}", m.replicates, m.n_init));
    let paths = parallel_map(ctx.workers, m.replicates, |r| simulate_mass(&cfg, r))?;
    ctx.samples("mass_paths", m.replicates);
    let z = p.z_limit;
    let p_half = 0.5 * cfg.rate() * cfg.dt;
    let mut rows = Vec::new();
    for &t in &m.times {
        let x: Vec<f64> = paths.iter().map(|q| q.mass_at(t).expect("snapshot")).collect();
        let s = summarize(&x);
        ctx.z_check(
            &format!("mass_martingale_t{t}"),
            z_score(s.mean, 1.0, s.se),
            z,
            format!("E X_t(1) = {:.4} ± {:.4}", s.mean, s.se),
        );
        let se = bootstrap_se(&x, variance, p.bootstrap, ctx.sub_seed(&format!("var{t}")));
        ctx.z_check(
            &format!("mass_variance_t{t}"),
            z_score(s.var, t, se),
            z,
            format!("Var X_t(1) = {:.4} ± {:.4} against t", s.var, se),
        );
        let alive = x.iter().filter(|v| **v > 0.0).count();
        let limit = 1.0 - (-2.0 / t).exp();
        let (frac, zl) = proportion_z(alive, x.len(), limit);
        ctx.z_check(
            &format!("survival_t{t}"),
            zl,
            z,
            format!("P(X_t(1) > 0) = {frac:.4} against 1 − e^(−2/t) = {limit:.4}"),
        );
        let exact = survival_exact(m.n_init as u64, p_half, m.dt, t);
        let (_, ze) = proportion_z(alive, x.len(), exact);
        ctx.z_check(
            &format!("survival_exact_t{t}"),
            ze,
            z,
            format!("against the exact discrete law {exact:.4}"),
        );
        rows.extend(paths.iter().map(|q| MassRow {
            replicate: q.replicate,
            t,
            mass: q.mass_at(t).expect("snapshot"),
            occupation: q.occupation_at(t).expect("snapshot"),
        }));
    }
    let occ: Vec<f64> = paths.iter().map(|q| q.occupation_at(1.0).expect("snapshot")).collect();
    let s = summarize(&occ);
    ctx.z_check(
        "mass_occupation_mean",
        z_score(s.mean, 1.0, s.se),
        z,
        format!("E ∫₀¹X_s(1)ds = {:.4} ± {:.4}", s.mean, s.se),
    );
    ctx.table("mass", &rows)?;
    Ok(())
}

fn spatial_means(p: &ClusterParams, ctx: &mut Ctx) -> Result<()> {
    let s = &p.spatial;
    let mut cfg = SimConfig::new(3, s.n_init, s.dt, Horizon::Finite(s.t));
    cfg.seed = ctx.sub_seed("spatial");
    cfg.snapshot_times = vec![s.t];
    let x = SpacePoint::on_axis(3, s.x_norm);
    let kernels = [
        ("heat", KernelDescriptor::Heat { t: s.heat_time, center: x }),
        ("log_plus", KernelDescriptor::LogPlus { center: x }),
    ];
    let mut reg = KernelRegistry::new();
    let ids: Vec<_> = kernels.iter().map(|(_, k)| reg.register(*k)).collect();
    ctx.log(&format!("spatial means: {} full paths", s.replicates));
    let paths = run_replicates(&cfg, &reg, s.replicates, ctx.workers)?;
    ctx.samples("spatial_paths", s.replicates);
    let spec = QuadratureSpec {
        tol: 1e-10,
        ..Default::default()
    };
    let mut stats = Vec::new();
    for ((name, k), id) in kernels.iter().zip(&ids) {
        let f = |rho: f64| k.radial(3, rho);
        let breaks = [1.0];
        let value_oracle = expect_about(3, s.t, s.x_norm, &f, &breaks, &spec)?;
        let occ_oracle = expect_about_time_integrated(3, s.t, s.x_norm, &f, &breaks, &spec)?;
        let v: Vec<f64> = paths.iter().map(|q| q.value_at(*id, s.t)).collect::<Result<_>>()?;
        let o: Vec<f64> = paths.iter().map(|q| q.occupation_at(*id, s.t)).collect::<Result<_>>()?;
        let (sv, so) = (summarize(&v), summarize(&o));
        ctx.z_check(
            &format!("mean_value_{name}"),
            z_score(sv.mean, value_oracle, sv.se),
            p.z_limit,
            format!("E X_t(φ) = {:.4} ± {:.4} against {:.4}", sv.mean, sv.se, value_oracle),
        );
        ctx.z_check(
            &format!("mean_occupation_{name}"),
            z_score(so.mean, occ_oracle, so.se),
            p.z_limit,
            format!("E ∫X_s(φ)ds = {:.4} ± {:.4} against {:.4}", so.mean, so.se, occ_oracle),
        );
        stats.push((name.to_string(), sv, value_oracle, so, occ_oracle));
    }
    ctx.stat("spatial_means", &stats)?;
    Ok(())
}

fn clusters(p: &ClusterParams, ctx: &mut Ctx) -> Result<()> {
    let c = &p.cluster;
    let horizon = c.times.iter().copied().fold(c.delta, f64::max);
    let mut cfg = SimConfig::new(3, c.n_init, c.dt, Horizon::Finite(horizon));
    cfg.seed = ctx.sub_seed("cluster");
    cfg.snapshot_times = c.times.clone();
    let x0 = SpacePoint::origin(3);
    let mut reg = KernelRegistry::new();
    let mut ids = vec![reg.register(KernelDescriptor::Mollified { center: x0, eps: c.eps })];
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut q = [0.0; 3];
            q[axis] = sign * c.grid_radius;
            let center = SpacePoint::new(&q)?;
            ids.push(reg.register(KernelDescriptor::Mollified { center, eps: c.eps }));
        }
    }
    ctx.log(&format!("sampling {} clusters conditioned on survival past {}", c.samples, c.delta));
    let samples = parallel_map(ctx.workers, c.samples, |r| sample_cluster(&x0, c.delta, &cfg, &reg, r, c.budget))?;
    ctx.samples("clusters", c.samples);
    let trials: u64 = samples.iter().map(|s| s.trials()).sum();
    let exact = cluster_survival_exact(&cfg, c.delta);
    let (rate, z) = proportion_z(samples.len(), trials as usize, exact);
    ctx.z_check(
        "cluster_acceptance",
        z,
        p.z_limit,
        format!("acceptance {rate:.4} over {trials} trials against the exact {exact:.4}"),
    );
    ctx.samples("cluster_trials", trials);

    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &t in &c.times {
        let mut sups = Vec::new();
        for s in &samples {
            let mut m: f64 = 0.0;
            for id in &ids {
                m = m.max(s.path.occupation_at(*id, t)?);
            }
            sups.push(m);
            rows.push(ClusterRow {
                replicate: s.path.replicate,
                rejections: s.rejections,
                t,
                sup_local_time: m,
            });
        }
        means.push((t, mean(&sups)));
    }
    // log-log slope of the mean sup against t
    let lx: Vec<f64> = means.iter().map(|m| m.0.ln()).collect();
    let ly: Vec<f64> = means.iter().map(|m| m.1.max(1e-300).ln()).collect();
    let slope = if lx.len() >= 2 {
        crate::stats::ols(&lx, &ly).map(|r| r.0).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    ctx.diag(
        "cluster_sup_local_time",
        means.windows(2).all(|w| w[1].1 >= w[0].1) && means[0].1 < means[means.len() - 1].1,
        Some(slope),
        format!("mean sup L̂ on the 7-point grid at t = {:?}: {:?}; value is the log-log slope", c.times, means),
    );
    ctx.stat("cluster_sup_means", &means)?;
    ctx.table("clusters", &rows)?;
    Ok(())
}
