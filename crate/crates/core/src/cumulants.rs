//! Cumulants of occupation integrals through the v_n recursion.
//!
//! For a radial φ ≥ 0 about a center x, v₁(t) = ∫₀ᵗ P_sφ ds and
//! v_n(t) = Σ_{k<n} ∫₀ᵗ P_{t−s}(v_k v_{n−k})(s) ds. Each v_n is radial about
//! x, so it is stored on a grid in ρ = |z − x|. The heat semigroup acts on
//! radial functions through the exact law of |B_h − z|; functions are
//! represented in a piecewise-linear (hat) basis and the Duhamel integral is
//! discretised with the trapezoid rule in time.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{expect_about, expect_about_time_integrated, radial_density, KernelDescriptor, Potential, SpacePoint};
use crate::particles::{AtomicMeasure, KernelId, PathRecord};
use crate::quadrature::{gl16, QuadratureSpec};
use crate::special::{erf, erfc, expint_e1};
use crate::stats;

/// Largest supported order of the recursion.
pub const N_MAX: usize = 8;

/// Relative change of v₂ allowed when the time grid is doubled.
pub const REFINEMENT_TOL: f64 = 2e-3;

/// c₁ = 1, c_n = Σ_{k=1}^{n−1} c_k c_{n−k}; c_n is the (n−1)-th Catalan number.
pub fn catalan_c(n: u32) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("c_n is defined for n ≥ 1".into()));
    }
    let mut c: Vec<u128> = vec![0, 1];
    for m in 2..=n as usize {
        let mut s: u128 = 0;
        for k in 1..m {
            s = c[k]
                .checked_mul(c[m - k])
                .and_then(|p| s.checked_add(p))
                .ok_or_else(|| Error::Domain(format!("c_{n} overflows 128-bit arithmetic")))?;
        }
        c.push(s);
    }
    u64::try_from(c[n as usize]).map_err(|_| Error::Domain(format!("c_{n} does not fit in 64 bits")))
}

/// F(θ) = ½ − (¼ − θ)^{1/2}, the generating function Σ c_n θⁿ.
pub fn gen_function_f(theta: f64) -> Result<f64> {
    if theta > 0.25 {
        return Err(Error::Domain(format!("F(θ) needs θ ≤ 1/4, got {theta}")));
    }
    Ok(0.5 - (0.25 - theta).sqrt())
}

/// Σ_{n ≤ n_max} c_n θⁿ in floating point.
pub fn gen_function_partial(theta: f64, n_max: usize) -> f64 {
    let mut c = vec![0.0f64, 1.0];
    for m in 2..=n_max {
        c.push((1..m).map(|k| c[k] * c[m - k]).sum());
    }
    (1..=n_max).map(|n| c[n] * theta.powi(n as i32)).sum()
}

/// Discretisation of the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CumulantGrid {
    /// Grid intervals in ρ.
    pub intervals: usize,
    /// Outer radius; defaults to 2|center| + 12√t + 1.
    pub rho_max: Option<f64>,
    pub time_steps: usize,
    /// Repeat n = 2 with twice the time steps and report the change.
    pub self_check: bool,
}

impl Default for CumulantGrid {
    fn default() -> Self {
        Self {
            intervals: 1024,
            rho_max: None,
            time_steps: 256,
            self_check: true,
        }
    }
}

/// Values of v_n(t, ·) on a radial grid about the kernel center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    pub kernel: KernelDescriptor,
    pub dim: usize,
    pub t: f64,
    /// The table describes `scale · kernel`.
    pub scale: f64,
    pub rho: Vec<f64>,
    /// `values[n − 1][i]` = v_n(t, rho[i]).
    pub values: Vec<Vec<f64>>,
    pub time_steps: usize,
    /// Relative change of v₂ under time-step doubling, when checked.
    pub refinement: Option<f64>,
    /// `history[n − 1][j][i]` = v_n(j·t/K, rho[i]).
    #[serde(skip)]
    history: Vec<Vec<Vec<f64>>>,
}

/// Outcome of the pointwise check v_n ≤ c_n rⁿ t^{(3n−2)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub n: usize,
    pub bound: f64,
    /// Largest v_n(s, ρ)/bound(s) over grid points and time levels.
    pub max_ratio: f64,
    pub holds: bool,
}

impl CumulantTable {
    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    fn order(&self, n: usize) -> Result<usize> {
        if n == 0 || n > self.n_max() {
            return Err(Error::Domain(format!("order {n} outside 1..={}", self.n_max())));
        }
        Ok(n - 1)
    }

    /// v_n(t, ρ) by linear interpolation.
    pub fn v(&self, n: usize, rho: f64) -> Result<f64> {
        let k = self.order(n)?;
        interpolate(&self.rho, &self.values[k], rho)
    }

    /// v_n(t, z) for a point z.
    pub fn v_at(&self, n: usize, z: &SpacePoint) -> Result<f64> {
        let rho = match self.kernel.center() {
            Some(c) => z.dist(&c),
            None => 0.0,
        };
        self.v(n, rho)
    }

    /// v_n at the j-th time level, j = 0..=time_steps.
    pub fn level(&self, n: usize, j: usize) -> Result<&[f64]> {
        let k = self.order(n)?;
        self.history[k]
            .get(j)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Domain(format!("time level {j} outside 0..={}", self.time_steps)))
    }

    /// μ(v_n) = Σ aᵢ v_n(t, yᵢ).
    pub fn pair(&self, mu: &AtomicMeasure, n: usize) -> Result<f64> {
        let mut s = 0.0;
        for a in mu.atoms() {
            s += a.mass * self.v_at(n, &a.at)?;
        }
        Ok(s)
    }

    /// Table for `s · kernel`: v_n scales as sⁿ.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for (k, row) in out.values.iter_mut().enumerate() {
            let f = s.powi(k as i32 + 1);
            row.iter_mut().for_each(|v| *v *= f);
        }
        for (k, levels) in out.history.iter_mut().enumerate() {
            let f = s.powi(k as i32 + 1);
            levels.iter_mut().flatten().for_each(|v| *v *= f);
        }
        out.scale *= s;
        out
    }

    /// Check v_n(s, ·) ≤ c_n rⁿ s^{(3n−2)/2} at every grid point and time level.
    pub fn bound_check(&self, r: f64, n_max: usize) -> Result<Vec<BoundVerdict>> {
        let mut out = Vec::new();
        for n in 1..=n_max.min(self.n_max()) {
            let cn = catalan_c(n as u32)? as f64;
            let env = |s: f64| cn * r.powi(n as i32) * s.powf((3 * n - 2) as f64 / 2.0);
            let mut worst: f64 = 0.0;
            for (j, level) in self.history[n - 1].iter().enumerate().skip(1) {
                let b = env(j as f64 * self.t / self.time_steps as f64);
                for v in level {
                    worst = worst.max(v / b);
                }
            }
            out.push(BoundVerdict {
                n,
                bound: env(self.t),
                max_ratio: worst,
                holds: worst <= 1.0,
            });
        }
        Ok(out)
    }

    /// True when every v_n is nondecreasing in time at every grid point.
    pub fn monotone_in_time(&self, slack: f64) -> bool {
        self.history.iter().all(|levels| {
            levels
                .windows(2)
                .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= *a - slack * a.abs().max(1e-300)))
        })
    }

    /// 2 Σ_{n ≤ n_max} (θ/2)ⁿ μ(v_n), the truncated log-Laplace series.
    pub fn log_laplace_partial(&self, mu: &AtomicMeasure, theta: f64) -> Result<f64> {
        let mut s = 0.0;
        for n in 1..=self.n_max() {
            s += 2.0 * (0.5 * theta).powi(n as i32) * self.pair(mu, n)?;
        }
        Ok(s)
    }

    /// Rows (n, r, v_n).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "r", "v_n"])?;
        for (k, row) in self.values.iter().enumerate() {
            for (r, v) in self.rho.iter().zip(row) {
                wr.write_record(&[(k + 1).to_string(), r.to_string(), v.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> Result<f64> {
    let last = *x.last().expect("nonempty grid");
    if !(at >= 0.0) || at > last * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("radius {at} outside the table range [0, {last}]")));
    }
    let h = x[1] - x[0];
    let i = ((at / h).floor() as usize).min(x.len() - 2);
    let f = ((at - x[i]) / h).clamp(0.0, 1.0);
    Ok(y[i] * (1.0 - f) + y[i + 1] * f)
}

/// v₁(t, ρ) for φ = 1/ρ in d=3: ∫₀ᵗ erf(ρ/√(2s))/ρ ds in closed form.
pub fn v1_inverse_distance(t: f64, rho: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let root = (2.0 * t / PI).sqrt();
    if rho < 1e-12 * t.sqrt() {
        return 2.0 * root;
    }
    let u = rho / (2.0 * t).sqrt();
    (t * erf(u) + rho * root * (-u * u).exp() - rho * rho * erfc(u)) / rho
}

/// q_{t+a}(ρ) − q_a(ρ) = ∫_a^{t+a} p_s(ρ) ds, finite at ρ = 0.
pub fn potential_increment(dim: usize, a: f64, t: f64, rho: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let b = t + a;
    match dim {
        3 => {
            if rho < 1e-9 * a.sqrt() {
                (2.0 / PI.sqrt()) * ((2.0 * a).powf(-0.5) - (2.0 * b).powf(-0.5)) / (2.0 * PI)
            } else {
                (erf(rho / (2.0 * a).sqrt()) - erf(rho / (2.0 * b).sqrt())) / (2.0 * PI * rho)
            }
        }
        _ => {
            if rho < 1e-9 * a.sqrt() {
                (b / a).ln() / (2.0 * PI)
            } else {
                (expint_e1(rho * rho / (2.0 * b)) - expint_e1(rho * rho / (2.0 * a))) / (2.0 * PI)
            }
        }
    }
}

enum FirstOrder {
    Const(f64),
    Radial(Box<dyn Fn(f64, f64) -> f64>),
}

fn first_order(kernel: &KernelDescriptor, dim: usize) -> Result<FirstOrder> {
    kernel.validate(dim)?;
    match *kernel {
        KernelDescriptor::Const { a } => Ok(FirstOrder::Const(a)),
        KernelDescriptor::Phi { .. } => {
            let c = kernel.radial(dim, 1.0);
            Ok(FirstOrder::Radial(Box::new(move |s, rho| c * v1_inverse_distance(s, rho))))
        }
        KernelDescriptor::Heat { t: a, .. } | KernelDescriptor::Mollified { eps: a, .. } => {
            Ok(FirstOrder::Radial(Box::new(move |s, rho| potential_increment(dim, a, s, rho))))
        }
        _ => Err(Error::Unsupported(format!("no first-order closed form for {kernel:?}"))),
    }
}

/// Exact coefficients aₙ with v_n = aₙ aⁿ t^{2n−1} for φ ≡ a.
pub fn constant_coefficients(n_max: usize) -> Vec<f64> {
    let mut c = vec![0.0, 1.0];
    for n in 2..=n_max {
        let s: f64 = (1..n).map(|k| c[k] * c[n - k]).sum();
        c.push(s / (2 * n - 1) as f64);
    }
    c
}

/// Banded matrix of P_h on the hat basis of a uniform radial grid.
struct RadialHeat {
    rows: Vec<(usize, Vec<f64>)>,
}

impl RadialHeat {
    fn new(dim: usize, h: f64, rho: &[f64]) -> Self {
        let m = rho.len() - 1;
        let delta = rho[1] - rho[0];
        let sd = h.sqrt();
        let reach = 10.0 * sd;
        let pieces = ((2.0 * delta / sd).ceil() as usize).max(1);
        let rule = gl16();
        let rows = rho
            .iter()
            .map(|&r| {
                let lo = ((r - reach) / delta).floor().max(0.0) as usize;
                let hi = (((r + reach) / delta).ceil() as usize).min(m);
                let k = |p: f64| radial_density(dim, h, r, p);
                let coeffs = (lo..=hi)
                    .map(|j| {
                        let mut a = 0.0;
                        let w = delta / pieces as f64;
                        for q in 0..pieces {
                            if j > 0 {
                                let (x0, x1) = (rho[j - 1] + q as f64 * w, rho[j - 1] + (q + 1) as f64 * w);
                                a += rule.integrate(&|p| k(p) * (p - rho[j - 1]) / delta, x0, x1);
                            }
                            if j < m {
                                let (x0, x1) = (rho[j] + q as f64 * w, rho[j] + (q + 1) as f64 * w);
                                a += rule.integrate(&|p| k(p) * (rho[j + 1] - p) / delta, x0, x1);
                            }
                        }
                        a
                    })
                    .collect();
                (lo, coeffs)
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(lo, c)| c.iter().zip(&f[*lo..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Run the recursion with Duhamel–trapezoid stepping; returns history
/// indexed [n − 1][level][i].
fn grid_recursion(
    dim: usize,
    t: f64,
    rho: &[f64],
    steps: usize,
    n_max: usize,
    v1: &dyn Fn(f64, f64) -> f64,
) -> Vec<Vec<Vec<f64>>> {
    let h = t / steps as f64;
    let heat = RadialHeat::new(dim, h, rho);
    let first: Vec<Vec<f64>> = (0..=steps)
        .map(|j| rho.iter().map(|&r| v1(j as f64 * h, r)).collect())
        .collect();
    let mut hist = vec![first];
    let m = rho.len();
    for n in 2..=n_max {
        let source = |j: usize, hist: &Vec<Vec<Vec<f64>>>| -> Vec<f64> {
            let mut f = vec![0.0; m];
            for k in 1..n {
                let (a, b) = (&hist[k - 1][j], &hist[n - k - 1][j]);
                for i in 0..m {
                    f[i] += a[i] * b[i];
                }
            }
            f
        };
        let mut levels = vec![vec![0.0; m]];
        let mut f_prev = source(0, &hist);
        for j in 0..steps {
            let f_next = source(j + 1, &hist);
            let cur = &levels[j];
            let arg: Vec<f64> = cur.iter().zip(&f_prev).map(|(v, f)| v + 0.5 * h * f).collect();
            let mut next = heat.apply(&arg);
            for (v, f) in next.iter_mut().zip(&f_next) {
                *v += 0.5 * h * f;
            }
            levels.push(next);
            f_prev = f_next;
        }
        hist.push(levels);
    }
    hist
}

/// Build v₁..v_{n_max} at time t for a radial kernel in dimension `dim`.
pub fn v_recursion(kernel: &KernelDescriptor, dim: usize, t: f64, n_max: usize, grid: &CumulantGrid) -> Result<CumulantTable> {
    if n_max == 0 || n_max > N_MAX {
        return Err(Error::Domain(format!("n_max must lie in 1..={N_MAX}, got {n_max}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("horizon must be finite and nonnegative, got {t}")));
    }
    if grid.intervals < 16 || grid.time_steps < 2 {
        return Err(Error::Config("cumulant grid needs ≥ 16 intervals and ≥ 2 time steps".into()));
    }
    let first = first_order(kernel, dim)?;
    let center = kernel.center().map(|c| c.norm()).unwrap_or(0.0);
    let rho_max = grid.rho_max.unwrap_or(2.0 * center + 12.0 * t.sqrt() + 1.0);
    if !(rho_max > 0.0) {
        return Err(Error::Config("rho_max must be positive".into()));
    }
    let m = grid.intervals;
    let rho: Vec<f64> = (0..=m).map(|i| rho_max * i as f64 / m as f64).collect();
    let steps = grid.time_steps;
    let mut refinement = None;
    let history = match first {
        FirstOrder::Const(a) => {
            let coef = constant_coefficients(n_max);
            (1..=n_max)
                .map(|n| {
                    (0..=steps)
                        .map(|j| {
                            let s = t * j as f64 / steps as f64;
                            vec![coef[n] * a.powi(n as i32) * s.powi(2 * n as i32 - 1); m + 1]
                        })
                        .collect()
                })
                .collect()
        }
        FirstOrder::Radial(v1) => {
            if t == 0.0 {
                vec![vec![vec![0.0; m + 1]; steps + 1]; n_max]
            } else {
                let hist = grid_recursion(dim, t, &rho, steps, n_max, &*v1);
                if grid.self_check && n_max >= 2 {
                    let fine = grid_recursion(dim, t, &rho, 2 * steps, 2, &*v1);
                    let coarse = &hist[1][steps];
                    let fine = &fine[1][2 * steps];
                    let top = fine.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                    let diff = coarse.iter().zip(fine).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                    let rel = if top > 0.0 { diff / top } else { 0.0 };
                    if rel > REFINEMENT_TOL {
                        return Err(Error::Tolerance {
                            a: 0.0,
                            b: t,
                            tol: REFINEMENT_TOL,
                            estimate: top,
                            error: rel,
                        });
                    }
                    refinement = Some(rel);
                }
                hist
            }
        }
    };
    let values = history.iter().map(|levels| levels[steps].clone()).collect();
    Ok(CumulantTable {
        kernel: *kernel,
        dim,
        t,
        scale: 1.0,
        rho,
        values,
        time_steps: steps,
        refinement,
        history,
    })
}

/// κ_n = 2·n!·μ(v_n)/2ⁿ.
pub fn cumulants_kappa(table: &CumulantTable, mu: &AtomicMeasure, n: usize) -> Result<f64> {
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    Ok(2.0 * fact * table.pair(mu, n)? / 2f64.powi(n as i32))
}

/// Central moments μ₂, μ₃, μ₄ from cumulants κ₂, κ₃, κ₄.
pub fn central_moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let k = |n: usize| kappa.get(n - 2).copied().unwrap_or(0.0);
    let mut out = Vec::new();
    if !kappa.is_empty() {
        out.push(k(2));
    }
    if kappa.len() >= 2 {
        out.push(k(3));
    }
    if kappa.len() >= 3 {
        out.push(k(4) + 3.0 * k(2) * k(2));
    }
    out
}

/// Bound on E exp(X_t(f)) from one point mass at `start`, finite when G < 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentBound {
    /// G = ∫₀ᵗ sup P_s f ds.
    pub g: f64,
    /// (P_t f)(start).
    pub p_t_f: f64,
    pub bound: Potential,
}

/// For f = θ·kernel with a radial kernel that decreases away from its
/// center: if G < 2 the bound is exp{P_t f · (1 − G/2)^{−1}}, otherwise the
/// bound diverges.
pub fn exp_moment_bound(kernel: &KernelDescriptor, theta: f64, dim: usize, t: f64, start: &SpacePoint) -> Result<ExpMomentBound> {
    kernel.validate(dim)?;
    if !(theta >= 0.0) {
        return Err(Error::Domain("f must be nonnegative".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain("horizon must be nonnegative".into()));
    }
    let spec = QuadratureSpec {
        tol: 1e-10,
        ..Default::default()
    };
    let (g, ptf) = match *kernel {
        KernelDescriptor::Const { a } => (a * t, a),
        KernelDescriptor::Phi { .. } | KernelDescriptor::LogPlus { .. } | KernelDescriptor::Heat { .. } | KernelDescriptor::Mollified { .. } => {
            let r = start.dist(&kernel.center().expect("centered kernel"));
            let f = |rho: f64| kernel.radial(dim, rho);
            let g = expect_about_time_integrated(dim, t, 0.0, &f, &[1.0], &spec)?;
            let p = if t == 0.0 {
                kernel.radial(dim, r)
            } else {
                expect_about(dim, t, r, &f, &[1.0], &spec)?
            };
            (g, p)
        }
        _ => return Err(Error::Unsupported(format!("no exponential-moment bound for {kernel:?}"))),
    };
    let (g, ptf) = (theta * g, theta * ptf);
    let bound = if g < 2.0 {
        Potential::Finite((ptf / (1.0 - 0.5 * g)).exp())
    } else {
        Potential::Infinite
    };
    Ok(ExpMomentBound { g, p_t_f: ptf, bound })
}

/// exp{2t⁻¹ F(rθt^{3/2}/2)}, the bound on E exp(θ∫₀ᵗX_s(1/|y−x|)ds) under
/// δ₀ implied by the v_n envelope; infinite beyond the radius of convergence.
pub fn occupation_exp_bound(theta: f64, t: f64, r: f64) -> Potential {
    match gen_function_f(r * theta * t.powf(1.5) / 2.0) {
        Ok(f) => Potential::Finite((2.0 * f / t).exp()),
        Err(_) => Potential::Infinite,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// 1 for the mean, k ≥ 2 for the k-th central moment.
    pub order: usize,
    pub empirical: f64,
    pub oracle: f64,
    pub se: f64,
    pub z: f64,
}

/// Compare sample mean and central moments (up to order n ≤ 4) with the
/// cumulant oracle. Standard errors of central moments are bootstrapped.
pub fn crosscheck_samples(samples: &[f64], table: &CumulantTable, mu: &AtomicMeasure, n: usize, resamples: usize, seed: u64) -> Result<Vec<MomentRow>> {
    if samples.len() < 200 {
        return Err(Error::Insufficient(format!(
            "moment cross-check needs at least 200 replicates, got {}",
            samples.len()
        )));
    }
    if !(1..=4).contains(&n) || n > table.n_max() {
        return Err(Error::Domain(format!("moment order {n} not available")));
    }
    let kappa: Vec<f64> = (2..=n).map(|k| cumulants_kappa(table, mu, k)).collect::<Result<_>>()?;
    let central = central_moments_from_cumulants(&kappa);
    let s = stats::summarize(samples);
    let mean_oracle = table.pair(mu, 1)?;
    let mut rows = vec![MomentRow {
        order: 1,
        empirical: s.mean,
        oracle: mean_oracle,
        se: s.se,
        z: stats::z_score(s.mean, mean_oracle, s.se),
    }];
    for k in 2..=n {
        let stat = |x: &[f64]| {
            if k == 2 {
                stats::variance(x)
            } else {
                stats::central_moment(x, k as i32)
            }
        };
        let emp = stat(samples);
        let se = stats::bootstrap_se(samples, stat, resamples, seed.wrapping_add(k as u64));
        let oracle = central[k - 2];
        rows.push(MomentRow {
            order: k,
            empirical: emp,
            oracle,
            se,
            z: stats::z_score(emp, oracle, se),
        });
    }
    Ok(rows)
}

/// Cross-check ∫₀ᵗX_s(φ)ds over simulated paths against the table.
pub fn mc_crosscheck_moments(
    paths: &[PathRecord],
    kernel: KernelId,
    t: f64,
    table: &CumulantTable,
    mu: &AtomicMeasure,
    n: usize,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    let samples: Vec<f64> = paths
        .iter()
        .map(|p| p.occupation_at(kernel, t).map(|v| v * table.scale))
        .collect::<Result<_>>()?;
    crosscheck_samples(&samples, table, mu, n, 1000, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::C_D3;

    #[test]
    fn catalan_values() {
        assert_eq!(catalan_c(1).unwrap(), 1);
        assert_eq!(catalan_c(2).unwrap(), 1);
        assert_eq!(catalan_c(4).unwrap(), 5);
        assert_eq!(catalan_c(6).unwrap(), 42);
        assert!(catalan_c(37).is_ok());
        assert!(catalan_c(40).is_err());
        assert!(catalan_c(0).is_err());
    }

    #[test]
    fn generating_function() {
        assert_eq!(gen_function_f(0.0).unwrap(), 0.0);
        assert_eq!(gen_function_f(0.25).unwrap(), 0.5);
        assert!(gen_function_f(0.3).is_err());
        let f = gen_function_f(0.1).unwrap();
        assert!((f - 0.1 - f * f).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel_is_exact() {
        let tab = v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, 2.0, 4, &CumulantGrid::default()).unwrap();
        assert!((tab.v(2, 0.7).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        assert!((tab.v(3, 0.0).unwrap() - 2.0 * 32.0 / 15.0).abs() < 1e-13);
        let zero = v_recursion(&KernelDescriptor::Const { a: 0.0 }, 2, 1.0, 3, &CumulantGrid::default()).unwrap();
        assert!(zero.values.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn grid_scheme_reproduces_constant_recursion() {
        // second route for φ ≡ 1: the hat-basis semigroup instead of P_s1 = 1
        let rho: Vec<f64> = (0..=256).map(|i| 12.0 * i as f64 / 256.0).collect();
        let hist = grid_recursion(3, 1.0, &rho, 128, 3, &|s, _| s);
        let v2 = hist[1][128][20];
        let v3 = hist[2][128][20];
        assert!((v2 - 1.0 / 3.0).abs() < 3e-5, "{v2}");
        assert!((v3 - 2.0 / 15.0).abs() < 3e-5, "{v3}");
    }

    #[test]
    fn inverse_distance_first_order_matches_quadrature() {
        let spec = QuadratureSpec {
            tol: 1e-10,
            ..Default::default()
        };
        for &(t, rho) in &[(1.0, 0.3), (0.5, 2.0), (2.0, 0.0)] {
            let q = expect_about_time_integrated(3, t, rho, &|p: f64| 1.0 / p, &[1.0], &spec).unwrap();
            assert!((v1_inverse_distance(t, rho) - q).abs() < 1e-7, "t={t} rho={rho}");
        }
    }

    #[test]
    fn mollified_first_order_matches_quadrature() {
        let spec = QuadratureSpec {
            tol: 1e-10,
            ..Default::default()
        };
        for dim in [2, 3] {
            for &rho in &[0.0, 0.05, 0.4] {
                let q = expect_about_time_integrated(dim, 1.0, rho, &|p: f64| crate::kernels::heat_radial(dim, 0.01, p), &[], &spec).unwrap();
                let c = potential_increment(dim, 0.01, 1.0, rho);
                assert!((c - q).abs() < 1e-6 * c.max(1.0), "d={dim} rho={rho}: {c} vs {q}");
            }
        }
    }

    #[test]
    fn kappa_scales_with_mass() {
        let tab = v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, 1.0, 3, &CumulantGrid::default()).unwrap();
        let one = AtomicMeasure::dirac(3);
        let two = AtomicMeasure::new(vec![crate::particles::Atom {
            mass: 2.0,
            at: SpacePoint::origin(3),
        }])
        .unwrap();
        for n in 2..=3 {
            let a = cumulants_kappa(&tab, &one, n).unwrap();
            let b = cumulants_kappa(&tab, &two, n).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-15);
        }
        assert!((cumulants_kappa(&tab, &one, 3).unwrap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn feller_laplace_exponent_is_attained() {
        // for f ≡ θ the bound equals E exp(θ X_t(1)) = exp(θ/(1 − θt/2))
        let b = exp_moment_bound(&KernelDescriptor::Const { a: 1.0 }, 0.5, 3, 1.0, &SpacePoint::origin(3)).unwrap();
        assert!((b.bound.finite().unwrap() - (0.5f64 / 0.75).exp()).abs() < 1e-14);
        let z = exp_moment_bound(&KernelDescriptor::Const { a: 0.0 }, 1.0, 3, 1.0, &SpacePoint::origin(3)).unwrap();
        assert_eq!(z.bound, Potential::Finite(1.0));
    }

    #[test]
    fn inverse_distance_bound_branches() {
        let phi = KernelDescriptor::Phi {
            center: SpacePoint::on_axis(3, 0.5),
        };
        let theta = 1.0 / C_D3;
        let b1 = exp_moment_bound(&phi, theta, 3, 1.0, &SpacePoint::origin(3)).unwrap();
        assert!((b1.g - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-7);
        assert!(b1.g <= 3f64.sqrt() && b1.bound.finite().is_some());
        let b2 = exp_moment_bound(&phi, theta, 3, 2.0, &SpacePoint::origin(3)).unwrap();
        assert!(b2.g >= 2.0);
        assert_eq!(b2.bound, Potential::Infinite);
    }

    #[test]
    fn moment_conversion() {
        assert_eq!(central_moments_from_cumulants(&[2.0, 1.0, 0.5]), vec![2.0, 1.0, 12.5]);
    }

    #[test]
    fn crosscheck_needs_replicates() {
        let tab = v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, 1.0, 2, &CumulantGrid::default()).unwrap();
        let mu = AtomicMeasure::dirac(3);
        assert!(matches!(
            crosscheck_samples(&[1.0; 10], &tab, &mu, 2, 100, 0),
            Err(Error::Insufficient(_))
        ));
    }
}
