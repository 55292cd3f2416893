//! Mass-only simulation.
//!
//! The particle count of the branching system is itself a Markov chain:
//! given n particles, the number of deaths is Binomial(n, p) and, among the
//! rest, the number of splits is Binomial(n − deaths, p/(1 − p)). Sampling
//! it directly gives the exact law of X_t(1), ζ and ∫X_s(1)ds at a tiny
//! fraction of the cost of moving particles.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::Horizon;

use super::{step_index, Extinction, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPath {
    pub replicate: u64,
    /// (t, X_t(1), ∫₀ᵗX_s(1)ds) at each snapshot time.
    pub snapshots: Vec<(f64, f64, f64)>,
    pub occupation: f64,
    pub end: Extinction,
}

impl MassPath {
    pub fn mass_at(&self, t: f64) -> Option<f64> {
        self.snapshots.iter().find(|s| (s.0 - t).abs() < 1e-9).map(|s| s.1)
    }

    pub fn occupation_at(&self, t: f64) -> Option<f64> {
        self.snapshots.iter().find(|s| (s.0 - t).abs() < 1e-9).map(|s| s.2)
    }
}

pub fn simulate_mass(cfg: &SimConfig, replicate: u64) -> Result<MassPath> {
    cfg.validate()?;
    let mut rng = cfg.rng(replicate);
    let p = 0.5 * cfg.rate() * cfg.dt;
    let q = p / (1.0 - p);
    let unit = cfg.unit_mass();
    let mut n: u64 = cfg
        .measure()
        .atoms()
        .iter()
        .map(|a| (a.mass * cfg.n_init as f64).round() as u64)
        .sum();
    let stops = cfg.snapshot_steps();
    let total = cfg.n_steps();
    let mut occ = 0.0;
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut next_stop = 0;
    let mut step = 0u64;
    let mut zeta = None;
    loop {
        while next_stop < stops.len() && stops[next_stop] == step {
            snapshots.push((step as f64 * cfg.dt, n as f64 * unit, occ));
            next_stop += 1;
        }
        if step >= total || n == 0 {
            break;
        }
        let deaths = Binomial::new(n, p).expect("valid probability").sample(&mut rng);
        let births = Binomial::new(n - deaths, q).expect("valid probability").sample(&mut rng);
        let m = n - deaths + births;
        occ += 0.5 * cfg.dt * (n + m) as f64 * unit;
        n = m;
        step += 1;
        if n == 0 {
            zeta = Some(step as f64 * cfg.dt);
        }
    }
    // snapshots after extinction see the frozen state
    while next_stop < stops.len() && n == 0 {
        snapshots.push((stops[next_stop] as f64 * cfg.dt, 0.0, occ));
        next_stop += 1;
    }
    let end = match (zeta, cfg.horizon) {
        (Some(z), _) => Extinction::Extinct(z),
        (None, Horizon::Finite(_)) => Extinction::Alive(step as f64 * cfg.dt),
        (None, Horizon::Infinite) => Extinction::Censored(step as f64 * cfg.dt),
    };
    Ok(MassPath {
        replicate,
        snapshots,
        occupation: occ,
        end,
    })
}

/// Exact P(ζ > t) for the discrete-time system started from `n0` particles,
/// by iterating the offspring generating function f(s) = p + (1 − 2p)s + ps².
pub fn survival_exact(n0: u64, p_half: f64, dt: f64, t: f64) -> f64 {
    let k = step_index(t, dt);
    let mut q = 0.0f64;
    for _ in 0..k {
        q = p_half + (1.0 - 2.0 * p_half) * q + p_half * q * q;
    }
    1.0 - q.powf(n0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_survival_approaches_continuum() {
        // N = 2000, dt = 1/(4N): P(ζ > 1) ≈ 1 − e^{−2}
        let n = 2000;
        let dt = SimConfig::max_dt(n);
        let s = survival_exact(n as u64, 0.5 * n as f64 * dt, dt, 1.0);
        assert!((s - (1.0 - (-2.0f64).exp())).abs() < 2e-3, "{s}");
    }

    #[test]
    fn mass_path_is_deterministic() {
        let mut c = SimConfig::new(3, 200, 1e-3, Horizon::Finite(1.0));
        c.snapshot_times = vec![0.5, 1.0];
        let a = simulate_mass(&c, 3).unwrap();
        let b = simulate_mass(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 2);
    }
}
