use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{Horizon, KernelDescriptor};

use super::{Compiled, SimRng, Extinction, Functionals, KernelRegistry, ParticleCloud, PathRecord, SimConfig, Snapshot};

/// Step-by-step driver for one replicate.
pub struct Simulator {
    cfg: SimConfig,
    config_hash: String,
    replicate: u64,
    kernels: Vec<KernelDescriptor>,
    compiled: Vec<Compiled>,
    cloud: ParticleCloud,
    next: Vec<[f64; 3]>,
    rng: SimRng,
    step: u64,
    sqrt_dt: f64,
    p_half: f64,
    initial: Vec<f64>,
    state: Functionals,
    mass_occupation: f64,
    extinct_at: Option<f64>,
    floor_hits: Vec<u64>,
    particle_steps: u64,
    max_particles: usize,
    snapshot_steps: Vec<u64>,
    snapshots: Vec<Snapshot>,
    acc: Vec<StepSums>,
}

#[derive(Debug, Clone, Copy, Default)]
struct StepSums {
    new: f64,
    dm: f64,
    sq: f64,
    hits: u64,
}

impl Simulator {
    pub fn new(cfg: &SimConfig, registry: &KernelRegistry, replicate: u64) -> Result<Self> {
        Self::with_rng(cfg, registry, replicate, cfg.rng(replicate))
    }

    pub(crate) fn with_rng(cfg: &SimConfig, registry: &KernelRegistry, replicate: u64, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        registry.validate(cfg.dim)?;
        let kernels = registry.descriptors().to_vec();
        let compiled: Vec<Compiled> = kernels.iter().map(|k| Compiled::new(k, cfg.dim)).collect();
        let cloud = ParticleCloud::from_measure(&cfg.measure(), cfg.n_init);
        let n = kernels.len();
        let mut sim = Self {
            config_hash: cfg.hash(),
            cfg: cfg.clone(),
            replicate,
            kernels,
            compiled,
            max_particles: cloud.len(),
            cloud,
            next: Vec::new(),
            rng,
            step: 0,
            sqrt_dt: cfg.dt.sqrt(),
            p_half: 0.5 * cfg.rate() * cfg.dt,
            initial: vec![0.0; n],
            state: Functionals::zeros(n),
            mass_occupation: 0.0,
            extinct_at: None,
            floor_hits: vec![0; n],
            particle_steps: 0,
            snapshot_steps: cfg.snapshot_steps(),
            snapshots: Vec::new(),
            acc: vec![StepSums::default(); n],
        };
        for j in 0..n {
            let mut s = 0.0;
            for p in sim.cloud.positions() {
                let (v, floored) = sim.compiled[j].eval(p);
                if floored {
                    sim.floor_hits[j] += 1;
                }
                s += v;
            }
            sim.initial[j] = s * sim.cloud.unit_mass;
            sim.state.value[j] = sim.initial[j];
        }
        sim.maybe_snapshot();
        Ok(sim)
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn is_extinct(&self) -> bool {
        self.cloud.is_extinct()
    }

    pub(crate) fn into_rng(self) -> SimRng {
        self.rng
    }

    /// Advance one step. Returns false if the system was already extinct.
    pub fn step(&mut self) -> bool {
        if self.cloud.is_extinct() {
            return false;
        }
        if self.step == 0 {
            if let Some(g) = self.cfg.graded_start {
                let n = g.steps.min(self.cfg.n_steps().max(1));
                let span = n as f64 * self.cfg.dt;
                let mut s = 0.0;
                for h in g.substeps(span, self.cfg.dt) {
                    s += h;
                    self.advance_by(h, s);
                    if self.cloud.is_extinct() {
                        break;
                    }
                }
                self.step = n;
                self.cloud.time = if self.cloud.is_extinct() { s } else { self.time() };
                self.maybe_snapshot();
                return true;
            }
        }
        self.advance_by(self.cfg.dt, (self.step + 1) as f64 * self.cfg.dt);
        self.step += 1;
        self.maybe_snapshot();
        true
    }

    /// Move, branch and accumulate over one interval of length `h` ending at `t_end`.
    fn advance_by(&mut self, h: f64, t_end: f64) {
        let dim = self.cfg.dim;
        let (p, sqrt_h) = if h == self.cfg.dt {
            (self.p_half, self.sqrt_dt)
        } else {
            (0.5 * self.cfg.rate() * h, h.sqrt())
        };
        let n_k = self.compiled.len();
        self.acc.iter_mut().for_each(|a| *a = StepSums::default());
        let prev_mass = self.cloud.mass();
        let mut cur = std::mem::take(self.cloud.positions_mut());
        self.particle_steps += cur.len() as u64;
        self.next.clear();
        for mut pos in cur.drain(..) {
            for c in pos.iter_mut().take(dim) {
                let z: f64 = self.rng.sample(StandardNormal);
                *c += sqrt_h * z;
            }
            let u: f64 = self.rng.random();
            let xi: u8 = if u < p {
                0
            } else if u < 2.0 * p {
                2
            } else {
                1
            };
            let xf = xi as f64;
            for (k, a) in self.compiled.iter().zip(self.acc.iter_mut()) {
                let (v, floored) = k.eval(&pos);
                a.hits += floored as u64;
                a.new += xf * v;
                a.dm += (xf - 1.0) * v;
                a.sq += v * v;
            }
            for _ in 0..xi {
                self.next.push(pos);
            }
        }
        *self.cloud.positions_mut() = std::mem::replace(&mut self.next, cur);
        self.max_particles = self.max_particles.max(self.cloud.len());
        self.cloud.time = t_end;

        let unit = self.cloud.unit_mass;
        let half_h = 0.5 * h;
        let bracket_w = self.cfg.rate() * h * unit * unit;
        let st = &mut self.state;
        for j in 0..n_k {
            let a = self.acc[j];
            let new = a.new * unit;
            let dm = a.dm * unit;
            self.floor_hits[j] += a.hits;
            st.occupation[j] += half_h * (st.value[j] + new);
            st.martingale[j] += dm;
            st.bracket[j] += bracket_w * a.sq;
            st.realized_qv[j] += dm * dm;
            st.value[j] = new;
        }
        self.mass_occupation += half_h * (prev_mass + self.cloud.mass());
        if self.cloud.is_extinct() {
            self.extinct_at = Some(t_end);
        }
    }

    fn maybe_snapshot(&mut self) {
        if self.snapshot_steps.binary_search(&self.step).is_ok() {
            self.push_snapshot(self.time());
        }
    }

    fn push_snapshot(&mut self, t: f64) {
        self.snapshots.push(Snapshot {
            t,
            mass: self.cloud.mass(),
            functionals: self.state.clone(),
            positions: self.cfg.keep_positions.then(|| self.cloud.positions().to_vec()),
        });
    }

    /// Run until `target` steps have been taken or the system dies out.
    pub fn advance_to(&mut self, target: u64) {
        while self.step < target && self.step() {}
    }

    /// Run to the configured horizon (or cap).
    pub fn run(&mut self) {
        self.advance_to(self.cfg.n_steps());
    }

    pub fn finish(mut self) -> PathRecord {
        let end = match (self.extinct_at, self.cfg.horizon) {
            (Some(z), _) => Extinction::Extinct(z),
            (None, Horizon::Finite(_)) => Extinction::Alive(self.time()),
            (None, Horizon::Infinite) => Extinction::Censored(self.time()),
        };
        if self.extinct_at.is_some() {
            // functionals are frozen after extinction
            let pending: Vec<u64> = self.snapshot_steps.iter().copied().filter(|s| *s > self.step).collect();
            for s in pending {
                self.push_snapshot(s as f64 * self.cfg.dt);
            }
        }
        PathRecord {
            config_hash: self.config_hash,
            replicate: self.replicate,
            dim: self.cfg.dim,
            unit_mass: self.cloud.unit_mass,
            dt: self.cfg.dt,
            kernels: self.kernels,
            initial: self.initial,
            terminal: self.state,
            end,
            snapshots: self.snapshots,
            mass_occupation: self.mass_occupation,
            floor_hits: self.floor_hits,
            particle_steps: self.particle_steps,
            max_particles: self.max_particles,
        }
    }
}

/// Simulate one replicate to the configured horizon.
pub fn simulate(cfg: &SimConfig, registry: &KernelRegistry, replicate: u64) -> Result<PathRecord> {
    let mut sim = Simulator::new(cfg, registry, replicate)?;
    sim.run();
    Ok(sim.finish())
}

/// Map `f` over `0..n` on a pool of `workers` threads, preserving order.
pub fn parallel_map<T, F>(workers: usize, n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Replicates 0..n in parallel; the result is independent of `workers`.
pub fn run_replicates(cfg: &SimConfig, registry: &KernelRegistry, n: u64, workers: usize) -> Result<Vec<PathRecord>> {
    cfg.validate()?;
    parallel_map(workers, n, |r| simulate(cfg, registry, r))
}

#[cfg(test)]
mod tests {
    use super::super::step_index;
    use super::*;
    use crate::kernels::SpacePoint;

    fn small() -> SimConfig {
        let mut c = SimConfig::new(3, 50, 0.005, Horizon::Finite(0.5));
        c.snapshot_times = vec![0.0, 0.25, 0.5];
        c
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let mut reg = KernelRegistry::new();
        reg.register(KernelDescriptor::Phi {
            center: SpacePoint::on_axis(3, 0.3),
        });
        let a = run_replicates(&small(), &reg, 4, 1).unwrap();
        let b = run_replicates(&small(), &reg, 4, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].hash(), a[1].hash());
    }

    #[test]
    fn constant_kernel_tracks_mass() {
        let mut reg = KernelRegistry::new();
        let one = reg.register(KernelDescriptor::Const { a: 1.0 });
        let p = simulate(&small(), &reg, 7).unwrap();
        assert!((p.occupation_integral(one).unwrap() - p.mass_occupation).abs() < 1e-12);
        // M(1) = X_t(1) − X_0(1) exactly
        let t = p.end.time();
        let m = p.martingale_at(one, t).unwrap();
        let x = p.value_at(one, t).unwrap();
        assert!((m - (x - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn occupation_is_nondecreasing() {
        let mut reg = KernelRegistry::new();
        let k = reg.register(KernelDescriptor::Mollified {
            center: SpacePoint::on_axis(3, 0.2),
            eps: 0.01,
        });
        let mut c = small();
        c.snapshot_times = (0..=10).map(|i| i as f64 * 0.05).collect();
        let p = simulate(&c, &reg, 1).unwrap();
        let occ: Vec<f64> = p.snapshots.iter().map(|s| s.functionals.occupation[k.0]).collect();
        assert!(occ.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn unregistered_kernel_is_an_error() {
        let p = simulate(&small(), &KernelRegistry::new(), 0).unwrap();
        assert!(matches!(
            p.occupation_integral(super::super::KernelId(0)),
            Err(Error::Unregistered(0))
        ));
    }

    #[test]
    fn run_to_extinction_records_zeta() {
        let mut c = SimConfig::new(2, 20, 0.01, Horizon::Infinite);
        c.t_cap = 5.0;
        let mut extinct = 0;
        for r in 0..20 {
            let p = simulate(&c, &KernelRegistry::new(), r).unwrap();
            match p.end {
                Extinction::Extinct(z) => {
                    assert!(z > 0.0);
                    extinct += 1;
                }
                Extinction::Censored(t) => assert!((t - 5.0).abs() < 1e-9),
                Extinction::Alive(_) => panic!("infinite horizon cannot end alive"),
            }
        }
        assert!(extinct > 10);
    }

    #[test]
    fn graded_start_covers_the_first_steps() {
        let g = super::super::GradedStart {
            steps: 4,
            ratio: 0.1,
            h_min: 1e-6,
        };
        let h = g.substeps(0.02, 0.005);
        assert!((h.iter().sum::<f64>() - 0.02).abs() < 1e-12);
        // nondecreasing apart from the last, which lands on the boundary
        assert!(h[..h.len() - 1].windows(2).all(|w| w[1] >= w[0]));
        assert!(h.iter().all(|x| *x <= 0.005));
        assert_eq!(h[0], 1e-6);

        let mut c = small();
        c.graded_start = Some(g);
        let mut reg = KernelRegistry::new();
        let one = reg.register(KernelDescriptor::Const { a: 1.0 });
        let p = simulate(&c, &reg, 3).unwrap();
        // the mass identity survives variable steps
        assert!((p.occupation_integral(one).unwrap() - p.mass_occupation).abs() < 1e-12);
        assert_eq!(p.snapshots[0].t, 0.0);
        assert!(p.particle_steps > simulate(&small(), &reg, 3).unwrap().particle_steps);

        c.snapshot_times = vec![0.01];
        assert!(c.validate().is_err());
    }

    #[test]
    fn step_index_rounds_up() {
        assert_eq!(step_index(1.0, 0.1), 10);
        assert_eq!(step_index(0.0, 0.1), 0);
        assert_eq!(step_index(0.25, 0.1), 3);
    }
}
