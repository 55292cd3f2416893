//! Local-time estimators, Tanaka decompositions and renormalized statistics.
//!
//! Two estimators of L_t^x are available on a simulated path.
//!
//! * `Mollified`: ∫₀ᵗ X_s(p_ε^x) ds, the occupation integral of the heat
//!   kernel at time ε. Nonnegative and nondecreasing in t; its mean is
//!   q_{t+ε}(x) − q_ε(x).
//! * `Tanaka`: the Tanaka formula read backwards. In d=3,
//!   L̂ = X_0(φ_x) + M_t(φ_x) − X_t(φ_x) with φ_x = 1/(2π|y−x|); in d=2,
//!   πL̂ = X_t(g_x) − X_0(g_x) − M_t(g_x) with g_x = log|y−x|. Here M is the
//!   branching martingale of the particle system, accumulated exactly from
//!   the death/split events. The mean is q_t(x) at any N and dt, and no
//!   bandwidth enters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{log_plus_inv, Horizon, KernelDescriptor, Potential, SpacePoint, C_D2, C_D3, TWO_C_SQ};
use crate::particles::{Extinction, Functionals, KernelId, KernelRegistry, PathRecord};

pub use crate::particles::{Atom, AtomicMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mollified,
    #[default]
    Tanaka,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub x: SpacePoint,
    pub t: Horizon,
    pub estimator: Estimator,
    /// Bandwidth, for the mollified estimator.
    pub eps: Option<f64>,
    pub value: f64,
    pub replicate: u64,
}

/// Kernel whose Tanaka formula yields the local time at x.
pub fn tanaka_kernel(x: &SpacePoint) -> KernelDescriptor {
    match x.dim() {
        3 => KernelDescriptor::Phi { center: *x },
        _ => KernelDescriptor::LogK { center: *x },
    }
}

/// Register the kernels an estimator needs at x.
pub fn register_estimator(reg: &mut KernelRegistry, estimator: Estimator, x: &SpacePoint, eps: f64) -> KernelId {
    match estimator {
        Estimator::Mollified => reg.register(KernelDescriptor::Mollified { center: *x, eps }),
        Estimator::Tanaka => reg.register(tanaka_kernel(x)),
    }
}

fn lookup(path: &PathRecord, k: &KernelDescriptor) -> Result<KernelId> {
    path.kernels
        .iter()
        .position(|q| q == k)
        .map(KernelId)
        .ok_or_else(|| Error::Domain(format!("kernel {k:?} was not registered on this path")))
}

fn state_at(path: &PathRecord, t: Horizon) -> Result<&Functionals> {
    match t {
        Horizon::Finite(0.0) => Err(Error::Domain("use t > 0; the estimate at t = 0 is 0".into())),
        Horizon::Finite(t) => path.at(t),
        Horizon::Infinite => match path.end {
            Extinction::Alive(_) => Err(Error::Domain(
                "t = ∞ needs a run-to-extinction path".into(),
            )),
            _ => Ok(&path.terminal),
        },
    }
}

/// Mollified estimate ∫₀ᵗ X_s(p_ε^x) ds.
pub fn estimate_local_time(path: &PathRecord, x: &SpacePoint, t: Horizon, eps: f64) -> Result<LocalTimeEstimate> {
    let value = if t == Horizon::Finite(0.0) {
        0.0
    } else {
        let id = lookup(path, &KernelDescriptor::Mollified { center: *x, eps })?;
        state_at(path, t)?.occupation[id.0]
    };
    Ok(LocalTimeEstimate {
        x: *x,
        t,
        estimator: Estimator::Mollified,
        eps: Some(eps),
        value,
        replicate: path.replicate,
    })
}

/// Tanaka estimate of L_t^x.
pub fn tanaka_local_time(path: &PathRecord, x: &SpacePoint, t: Horizon) -> Result<LocalTimeEstimate> {
    let value = if t == Horizon::Finite(0.0) {
        0.0
    } else {
        let id = lookup(path, &tanaka_kernel(x))?;
        let st = state_at(path, t)?;
        let (x0, m, xt) = (path.initial[id.0], st.martingale[id.0], st.value[id.0]);
        match x.dim() {
            3 => x0 + m - xt,
            _ => (xt - x0 - m) / std::f64::consts::PI,
        }
    };
    Ok(LocalTimeEstimate {
        x: *x,
        t,
        estimator: Estimator::Tanaka,
        eps: None,
        value,
        replicate: path.replicate,
    })
}

/// Estimate with the chosen estimator.
pub fn local_time(path: &PathRecord, estimator: Estimator, x: &SpacePoint, t: Horizon, eps: f64) -> Result<f64> {
    Ok(match estimator {
        Estimator::Mollified => estimate_local_time(path, x, t, eps)?.value,
        Estimator::Tanaka => tanaka_local_time(path, x, t)?.value,
    })
}

/// E L̂ of the mollified estimator under δ₀: q_{t+ε}(x) − q_ε(x).
pub fn mollified_mean(dim: usize, t: f64, x_norm: f64, eps: f64) -> f64 {
    use crate::kernels::potential_radial;
    potential_radial(dim, t + eps, x_norm) - potential_radial(dim, eps, x_norm)
}

/// Default bandwidth max(0.5·N^{−1/(d+2)}, 2√dt).
pub fn default_bandwidth(dim: usize, n: usize, dt: f64) -> f64 {
    (0.5 * (n as f64).powf(-1.0 / (dim as f64 + 2.0))).max(2.0 * dt.sqrt())
}

/// ψ(x) = (2c² log(1/|x|))^{1/2} for 0 < |x| < 1.
pub fn psi(x_norm: f64) -> Result<f64> {
    if !(x_norm > 0.0 && x_norm < 1.0) {
        return Err(Error::Domain(format!("psi needs 0 < |x| < 1, got {x_norm}")));
    }
    Ok((TWO_C_SQ * (1.0 / x_norm).ln()).sqrt())
}

/// (L̂ − 1/(2π|x|))/ψ(x).
pub fn renorm_stat_d3(l: f64, x: &SpacePoint) -> Result<f64> {
    let r = x.norm();
    Ok((l - C_D3 / r) / psi(r)?)
}

/// L̂ − (1/π) log(1/|x|).
pub fn renorm_stat_d2(l: f64, x: &SpacePoint) -> Result<f64> {
    let r = x.norm();
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("d=2 renormalization needs 0 < |x| < 1, got {r}")));
    }
    Ok(l - C_D2 * (1.0 / r).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanakaDecomposition {
    pub dim: usize,
    pub x: SpacePoint,
    pub t: f64,
    /// Mollified local time L̂.
    pub local_time: f64,
    /// X_0 of the Tanaka kernel (φ_x in d=3, g_x in d=2).
    pub initial: f64,
    /// X_t of the Tanaka kernel.
    pub terminal: f64,
    /// Martingale implied by the rearranged Tanaka formula.
    pub implied_martingale: f64,
    /// Branching martingale accumulated during simulation.
    pub branching_martingale: f64,
    /// Predictable bracket of the branching martingale of φ_x (d=3) or g_x.
    pub bracket: f64,
    /// ½∫₀ᵗX_s(|y−x|⁻²)ds, when the inverse-square kernel was registered (d=3).
    pub half_inv_sq_occupation: Option<f64>,
    /// X_t(g_x) − X_0(g_x) − M_t(g_x), when g_x was registered (d=3).
    pub log_side: Option<f64>,
    /// Number of singularity-floor substitutions on this path.
    pub floor_hits: u64,
}

impl TanakaDecomposition {
    /// L̂ − X_0(φ) − (M̂ − X_t(φ)); zero up to round-off by construction.
    pub fn identity_residual(&self) -> f64 {
        match self.dim {
            3 => (self.local_time - self.initial) - (self.implied_martingale - self.terminal),
            _ => {
                std::f64::consts::PI * self.local_time
                    - (self.terminal - self.initial - self.implied_martingale)
            }
        }
    }
}

/// Kernels needed by `tanaka_decompose` at x.
pub fn register_tanaka(reg: &mut KernelRegistry, x: &SpacePoint, eps: f64) {
    reg.register(KernelDescriptor::Mollified { center: *x, eps });
    reg.register(tanaka_kernel(x));
    if x.dim() == 3 {
        reg.register(KernelDescriptor::InvSq { center: *x });
        reg.register(KernelDescriptor::LogK { center: *x });
    }
}

/// Decompose the mollified local time through the Tanaka formula.
pub fn tanaka_decompose(path: &PathRecord, x: &SpacePoint, t: f64, eps: f64) -> Result<TanakaDecomposition> {
    let dim = x.dim();
    if dim != path.dim {
        return Err(Error::Domain("point and path dimensions differ".into()));
    }
    let st = path.at(t)?;
    let lt = lookup(path, &KernelDescriptor::Mollified { center: *x, eps })?;
    let k = lookup(path, &tanaka_kernel(x))?;
    let l = st.occupation[lt.0];
    let (x0, xt) = (path.initial[k.0], st.value[k.0]);
    let implied = match dim {
        3 => l + xt - x0,
        _ => xt - std::f64::consts::PI * l - x0,
    };
    let mut floor_hits = path.floor_hits[k.0];
    let (half_inv_sq_occupation, log_side) = if dim == 3 {
        let inv = lookup(path, &KernelDescriptor::InvSq { center: *x }).ok();
        let lg = lookup(path, &KernelDescriptor::LogK { center: *x }).ok();
        if let Some(i) = inv {
            floor_hits += path.floor_hits[i.0];
        }
        (
            inv.map(|i| 0.5 * st.occupation[i.0]),
            lg.map(|g| st.value[g.0] - path.initial[g.0] - st.martingale[g.0]),
        )
    } else {
        (None, None)
    };
    Ok(TanakaDecomposition {
        dim,
        x: *x,
        t,
        local_time: l,
        initial: x0,
        terminal: xt,
        implied_martingale: implied,
        branching_martingale: st.martingale[k.0],
        bracket: st.bracket[k.0],
        half_inv_sq_occupation,
        log_side,
        floor_hits,
    })
}

/// Per-path sequence |xₙ|^α (L̂(xₙ) − c/|xₙ|) and its running envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSequence {
    pub alpha: f64,
    pub x_norms: Vec<f64>,
    pub values: Vec<f64>,
    /// E_n = max_{m ≥ n} |values_m|.
    pub envelope: Vec<f64>,
}

impl RateSequence {
    pub fn new(alpha: f64, x_norms: &[f64], local_times: &[f64]) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("rate exponent must lie in (0, 1), got {alpha}")));
        }
        if x_norms.len() != local_times.len() || x_norms.is_empty() {
            return Err(Error::Domain("one local time per point is needed".into()));
        }
        if x_norms.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Domain("points must approach the origin".into()));
        }
        let values: Vec<f64> = x_norms
            .iter()
            .zip(local_times)
            .map(|(r, l)| r.powf(alpha) * (l - C_D3 / r))
            .collect();
        let mut envelope = vec![0.0; values.len()];
        let mut m: f64 = 0.0;
        for i in (0..values.len()).rev() {
            m = m.max(values[i].abs());
            envelope[i] = m;
        }
        Ok(Self {
            alpha,
            x_norms: x_norms.to_vec(),
            values,
            envelope,
        })
    }

    /// The envelope ends strictly below where it starts.
    pub fn decays(&self) -> bool {
        self.envelope.last() < self.envelope.first()
    }

    /// log(E_last / E_first).
    pub fn log_decay(&self) -> f64 {
        (self.envelope[self.envelope.len() - 1] / self.envelope[0]).ln()
    }
}

/// Normalizers of the bad-point statistics at x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadPointNormalizers {
    /// μ(φ_x) = Σ aᵢ c/|yᵢ − x|
    pub newtonian: f64,
    /// Λ = Σ aᵢ log⁺(1/|yᵢ − x|)
    pub log_mass: f64,
}

pub fn bad_point_normalizers(mu: &AtomicMeasure, x: &SpacePoint) -> Result<BadPointNormalizers> {
    if mu.is_atom(x) {
        return Err(Error::Domain("the point is an atom of the initial measure".into()));
    }
    match (mu.newtonian(x), mu.log_potential(x)) {
        (Potential::Finite(newtonian), Potential::Finite(log_mass)) => Ok(BadPointNormalizers { newtonian, log_mass }),
        _ => Err(Error::Domain("the point is an atom of the initial measure".into())),
    }
}

/// (L̂ − μ(φ_x)) / (2c²Λ)^{1/2}.
pub fn bad_point_stat(l: f64, n: &BadPointNormalizers) -> Result<f64> {
    if !(n.log_mass > 0.0) {
        return Err(Error::Domain("log potential vanishes at this point".into()));
    }
    Ok((l - n.newtonian) / (TWO_C_SQ * n.log_mass).sqrt())
}

/// log⁺(1/|x|) with |x| > 0.
pub fn log_plus(x_norm: f64) -> f64 {
    log_plus_inv(x_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{simulate, SimConfig};
    use std::f64::consts::PI;

    #[test]
    fn renorm_d3_values() {
        let x = SpacePoint::on_axis(3, 0.3);
        assert!(renorm_stat_d3(C_D3 / 0.3, &x).unwrap().abs() < 1e-15);
        let e = (-1.0f64).exp();
        assert!((psi(e).unwrap() - 1.0 / (2f64.sqrt() * PI)).abs() < 1e-15);
        assert!(renorm_stat_d3(1.0, &SpacePoint::on_axis(3, 1.5)).is_err());
    }

    #[test]
    fn renorm_d2_centered() {
        let x = SpacePoint::on_axis(2, 0.1);
        assert!(renorm_stat_d2(C_D2 * 10f64.ln(), &x).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rate_sequence_of_exact_pole_is_zero() {
        let xs = [0.25, 0.125, 0.0625];
        let ls: Vec<f64> = xs.iter().map(|r| C_D3 / r).collect();
        let s = RateSequence::new(0.5, &xs, &ls).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn two_atom_normalizer() {
        let mu = AtomicMeasure::new(vec![
            Atom {
                mass: 0.5,
                at: SpacePoint::origin(3),
            },
            Atom {
                mass: 0.5,
                at: SpacePoint::on_axis(3, 1.0),
            },
        ])
        .unwrap();
        for n in 1..6 {
            let h = 2f64.powi(-n);
            let nz = bad_point_normalizers(&mu, &SpacePoint::on_axis(3, h)).unwrap();
            let want = (1.0 / (4.0 * PI)) * 2f64.powi(n) + (1.0 / (4.0 * PI)) / (1.0 - h);
            assert!((nz.newtonian - want).abs() < 1e-12 * want);
        }
        assert!(bad_point_normalizers(&mu, &SpacePoint::origin(3)).is_err());
    }

    #[test]
    fn decomposition_identity_is_exact() {
        let x = SpacePoint::on_axis(3, 0.4);
        let mut reg = KernelRegistry::new();
        register_tanaka(&mut reg, &x, 0.01);
        let mut c = SimConfig::new(3, 100, 2.5e-3, Horizon::Finite(0.5));
        c.seed = 5;
        let p = simulate(&c, &reg, 0).unwrap();
        let d = tanaka_decompose(&p, &x, 0.5, 0.01).unwrap();
        assert!(d.identity_residual().abs() < 1e-12);
        let l0 = estimate_local_time(&p, &x, Horizon::Finite(0.0), 0.01).unwrap();
        assert_eq!(l0.value, 0.0);
    }
}
