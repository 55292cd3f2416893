//! Rejection sampling of single-ancestor clusters.
//!
//! A system started from one particle of mass 1/N approximates the
//! canonical measure scaled by 1/N; conditioning on survival past δ turns it
//! into a probability law approximating ℕ_{x₀}(· | ζ > δ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SpacePoint;

use super::{step_index, Atom, AtomicMeasure, KernelRegistry, PathRecord, SimConfig, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub x0: SpacePoint,
    pub delta: f64,
    pub path: PathRecord,
    /// Rejected trials before the accepted one.
    pub rejections: u64,
}

impl ClusterSample {
    pub fn trials(&self) -> u64 {
        self.rejections + 1
    }
}

/// Draw one cluster surviving past `delta`. Trials share the replicate's
/// random stream, so the result is deterministic.
pub fn sample_cluster(
    x0: &SpacePoint,
    delta: f64,
    cfg: &SimConfig,
    registry: &KernelRegistry,
    replicate: u64,
    budget: u64,
) -> Result<ClusterSample> {
    if !(delta > 0.0) {
        return Err(Error::Domain("survival threshold must be positive".into()));
    }
    let mut c = cfg.clone();
    c.initial_measure = Some(AtomicMeasure::new(vec![Atom {
        mass: cfg.unit_mass(),
        at: *x0,
    }])?);
    let k_delta = step_index(delta, c.dt);
    let mut rng = c.rng(replicate);
    for trial in 0..budget {
        let mut sim = Simulator::with_rng(&c, registry, replicate, rng)?;
        sim.advance_to(k_delta);
        if sim.is_extinct() {
            rng = sim.into_rng();
            continue;
        }
        sim.run();
        return Ok(ClusterSample {
            x0: *x0,
            delta,
            path: sim.finish(),
            rejections: trial,
        });
    }
    Err(Error::RejectionBudget {
        trials: budget,
        rate: 0.0,
    })
}

/// Exact probability that one particle of the discrete system survives past
/// δ; tends to 1 − e^{−2/(Nδ)} ≈ 2/(Nδ) as N grows.
pub fn cluster_survival_exact(cfg: &SimConfig, delta: f64) -> f64 {
    super::survival_exact(1, 0.5 * cfg.rate() * cfg.dt, cfg.dt, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Horizon;

    #[test]
    fn accepted_clusters_outlive_threshold() {
        let mut c = SimConfig::new(3, 100, 2.5e-3, Horizon::Finite(0.2));
        c.seed = 11;
        let x0 = SpacePoint::on_axis(3, 0.1);
        for r in 0..5 {
            let s = sample_cluster(&x0, 0.05, &c, &KernelRegistry::new(), r, 10_000).unwrap();
            match s.path.end {
                super::super::Extinction::Extinct(z) => assert!(z > 0.05),
                super::super::Extinction::Alive(t) => assert!(t >= 0.2 - 1e-12),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let c = SimConfig::new(3, 1000, 2.5e-4, Horizon::Finite(1.0));
        let e = sample_cluster(&SpacePoint::origin(3), 1.0, &c, &KernelRegistry::new(), 0, 2).unwrap_err();
        assert!(matches!(e, Error::RejectionBudget { trials: 2, .. }));
    }
}
