//! Branching Brownian particle approximation of super-Brownian motion.
//!
//! N particles of mass 1/N start from the initial measure. Each step every
//! particle takes a Gaussian step with per-coordinate variance `dt`, then
//! independently dies or splits in two, each with probability
//! `branching_rate * dt / 2`. With `branching_rate = N` the total mass has
//! quadratic variation ∫X_s(1)ds, the normalization of the limit process.
//!
//! Replicate `r` of a run with master seed `s` takes the first 32 bytes of
//! the ChaCha8 stream `(seed = s, stream = r)` as the seed of a
//! Xoshiro256++ generator that drives the particle loop. Results therefore
//! depend only on `(s, r)`, never on scheduling.

mod cluster;
mod mass;
mod sim;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{check_dim, heat_radial, log_plus_inv, Horizon, KernelDescriptor, SpacePoint, C_D3, EPS_FLOOR};

pub use cluster::{cluster_survival_exact, sample_cluster, ClusterSample};
pub use mass::{simulate_mass, survival_exact, MassPath};
pub use sim::{parallel_map, run_replicates, simulate, Simulator};

/// Default cap for run-to-extinction mode.
pub const DEFAULT_T_CAP: f64 = 50.0;

/// One atom a·δ_y of an atomic measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub mass: f64,
    pub at: SpacePoint,
}

/// Finite atomic measure Σ aᵢδ_{yᵢ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("atomic measure needs at least one atom".into()));
        }
        let dim = atoms[0].at.dim();
        for a in &atoms {
            if !(a.mass > 0.0) || !a.mass.is_finite() {
                return Err(Error::Domain(format!("atom mass must be positive, got {}", a.mass)));
            }
            if a.at.dim() != dim {
                return Err(Error::Domain("atoms must share a dimension".into()));
            }
        }
        Ok(Self { atoms })
    }

    /// Unit point mass at the origin.
    pub fn dirac(dim: usize) -> Self {
        Self {
            atoms: vec![Atom {
                mass: 1.0,
                at: SpacePoint::origin(dim),
            }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].at.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn is_atom(&self, x: &SpacePoint) -> bool {
        self.atoms.iter().any(|a| a.at.dist(x) == 0.0)
    }

    /// μ(φ_x) = Σ aᵢ c/|yᵢ − x| in d=3.
    pub fn newtonian(&self, x: &SpacePoint) -> crate::kernels::Potential {
        use crate::kernels::Potential;
        let mut s = 0.0;
        for a in &self.atoms {
            let r = a.at.dist(x);
            if r == 0.0 {
                return Potential::Infinite;
            }
            s += a.mass * C_D3 / r;
        }
        Potential::Finite(s)
    }

    /// Σ aᵢ log⁺(1/|yᵢ − x|).
    pub fn log_potential(&self, x: &SpacePoint) -> crate::kernels::Potential {
        use crate::kernels::Potential;
        let mut s = 0.0;
        for a in &self.atoms {
            let r = a.at.dist(x);
            if r == 0.0 {
                return Potential::Infinite;
            }
            s += a.mass * log_plus_inv(r);
        }
        Potential::Finite(s)
    }

    /// ∫φ dμ for a kernel that is finite at every atom.
    pub fn apply(&self, k: &KernelDescriptor) -> Result<f64> {
        let mut s = 0.0;
        for a in &self.atoms {
            s += a.mass * k.eval_strict(&a.at)?;
        }
        Ok(s)
    }
}

impl TryFrom<Vec<Atom>> for AtomicMeasure {
    type Error = Error;
    fn try_from(v: Vec<Atom>) -> Result<Self> {
        AtomicMeasure::new(v)
    }
}

impl From<AtomicMeasure> for Vec<Atom> {
    fn from(m: AtomicMeasure) -> Self {
        m.atoms
    }
}

/// Configuration of one particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dim: usize,
    /// N: particles per unit of initial mass.
    pub n_init: usize,
    pub dt: f64,
    /// `{"finite": t}` or `"infinite"` (run to extinction, capped at `t_cap`).
    pub horizon: Horizon,
    #[serde(default = "default_t_cap")]
    pub t_cap: f64,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to N.
    #[serde(default)]
    pub branching_rate: Option<f64>,
    /// Defaults to δ₀.
    #[serde(default)]
    pub initial_measure: Option<AtomicMeasure>,
    /// Times at which functionals are recorded.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Keep particle positions at snapshot times.
    #[serde(default)]
    pub keep_positions: bool,
    /// Geometric substeps over the first few steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graded_start: Option<GradedStart>,
}

/// Covers `[0, steps·dt]` with substeps h = clamp(ratio·s, h_min, dt).
///
/// The cloud starts concentrated on atoms, so functionals singular at
/// distance r from an atom need steps well below r² early on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradedStart {
    pub steps: u64,
    pub ratio: f64,
    pub h_min: f64,
}

impl GradedStart {
    /// Substep lengths covering `[0, span]`.
    pub fn substeps(&self, span: f64, dt: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut s = 0.0;
        while span - s > 1e-15 * span {
            let h = (self.ratio * s).clamp(self.h_min, dt).min(span - s);
            out.push(h);
            s += h;
        }
        out
    }
}

fn default_t_cap() -> f64 {
    DEFAULT_T_CAP
}

impl SimConfig {
    pub fn new(dim: usize, n_init: usize, dt: f64, horizon: Horizon) -> Self {
        Self {
            dim,
            n_init,
            dt,
            horizon,
            t_cap: DEFAULT_T_CAP,
            seed: 0,
            branching_rate: None,
            initial_measure: None,
            snapshot_times: Vec::new(),
            keep_positions: false,
            graded_start: None,
        }
    }

    pub fn rate(&self) -> f64 {
        self.branching_rate.unwrap_or(self.n_init as f64)
    }

    pub fn unit_mass(&self) -> f64 {
        1.0 / self.n_init as f64
    }

    pub fn measure(&self) -> AtomicMeasure {
        self.initial_measure.clone().unwrap_or_else(|| AtomicMeasure::dirac(self.dim))
    }

    /// Largest admissible step for the given N: 1/(4·rate).
    pub fn max_dt(n_init: usize) -> f64 {
        0.25 / n_init as f64
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        let rate = self.rate();
        if !(rate > 0.0) {
            return Err(Error::Config("branching_rate must be positive".into()));
        }
        if rate * self.dt > 0.25 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} too large: branching_rate·dt = {} exceeds 1/4",
                self.dt,
                rate * self.dt
            )));
        }
        if let Horizon::Finite(t) = self.horizon {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Config("horizon must be a nonnegative time".into()));
            }
        }
        if !(self.t_cap > 0.0) {
            return Err(Error::Config("t_cap must be positive".into()));
        }
        if self.snapshot_times.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("snapshot times must be nonnegative".into()));
        }
        if let Some(g) = &self.graded_start {
            if !(g.ratio > 0.0 && g.h_min > 0.0 && g.h_min <= self.dt) || g.steps == 0 {
                return Err(Error::Config("graded_start needs ratio > 0, 0 < h_min ≤ dt and steps ≥ 1".into()));
            }
            if self.snapshot_steps().iter().any(|k| *k > 0 && *k < g.steps) {
                return Err(Error::Config("no snapshot may fall inside the graded start".into()));
            }
        }
        if let Some(m) = &self.initial_measure {
            if m.dim() != self.dim {
                return Err(Error::Config("initial measure dimension mismatch".into()));
            }
            for a in m.atoms() {
                if (a.mass * self.n_init as f64).round() < 1.0 {
                    return Err(Error::Config(format!(
                        "atom of mass {} gets no particles at N = {}",
                        a.mass, self.n_init
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of steps to reach the horizon (or the cap).
    pub fn n_steps(&self) -> u64 {
        let end = match self.horizon {
            Horizon::Finite(t) => t,
            Horizon::Infinite => self.t_cap,
        };
        step_index(end, self.dt)
    }

    /// Step indices of the snapshot times.
    pub fn snapshot_steps(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.snapshot_times.iter().map(|t| step_index(*t, self.dt)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub(crate) fn rng(&self, replicate: u64) -> SimRng {
        replicate_rng(self.seed, replicate)
    }
}

/// Generator used inside the particle loop.
pub type SimRng = Xoshiro256PlusPlus;

/// Counter-based split: replicate `r` of master seed `s`.
pub fn replicate_rng(seed: u64, replicate: u64) -> SimRng {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    master.set_stream(replicate);
    let mut key = [0u8; 32];
    master.fill_bytes(&mut key);
    Xoshiro256PlusPlus::from_seed(key)
}

pub(crate) fn step_index(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil().max(0.0) as u64
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Handle to a kernel registered before simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelId(pub usize);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelRegistry {
    kernels: Vec<KernelDescriptor>,
}

impl KernelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a kernel; registering the same descriptor twice returns the
    /// existing id.
    pub fn register(&mut self, k: KernelDescriptor) -> KernelId {
        if let Some(id) = self.find(&k) {
            return id;
        }
        self.kernels.push(k);
        KernelId(self.kernels.len() - 1)
    }

    pub fn find(&self, k: &KernelDescriptor) -> Option<KernelId> {
        self.kernels.iter().position(|q| q == k).map(KernelId)
    }

    pub fn get(&self, id: KernelId) -> Result<&KernelDescriptor> {
        self.kernels.get(id.0).ok_or(Error::Unregistered(id.0))
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn descriptors(&self) -> &[KernelDescriptor] {
        &self.kernels
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.kernels.iter().try_for_each(|k| k.validate(dim))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Heat { norm: f64, inv2t: f64 },
    Phi,
    Log,
    GBar,
    LogPlus,
    InvSq,
    Const(f64),
}

/// Kernel with precomputed constants, evaluated on raw coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Compiled {
    center: [f64; 3],
    kind: Kind,
}

impl Compiled {
    pub(crate) fn new(k: &KernelDescriptor, dim: usize) -> Self {
        let center = k.center().map(|c| c.raw()).unwrap_or([0.0; 3]);
        let heat = |t: f64| Kind::Heat {
            norm: heat_radial(dim, t, 0.0),
            inv2t: 0.5 / t,
        };
        let kind = match *k {
            KernelDescriptor::Heat { t, .. } => heat(t),
            KernelDescriptor::Mollified { eps, .. } => heat(eps),
            KernelDescriptor::Phi { .. } => Kind::Phi,
            KernelDescriptor::LogK { .. } => Kind::Log,
            KernelDescriptor::GBar { .. } => Kind::GBar,
            KernelDescriptor::LogPlus { .. } => Kind::LogPlus,
            KernelDescriptor::InvSq { .. } => Kind::InvSq,
            KernelDescriptor::Const { a } => Kind::Const(a),
        };
        Self { center, kind }
    }

    /// Value at y and whether the singularity floor was applied.
    #[inline]
    pub(crate) fn eval(&self, y: &[f64; 3]) -> (f64, bool) {
        let dx = y[0] - self.center[0];
        let dy = y[1] - self.center[1];
        let dz = y[2] - self.center[2];
        let r2 = dx * dx + dy * dy + dz * dz;
        match self.kind {
            Kind::Heat { norm, inv2t } => (norm * (-r2 * inv2t).exp(), false),
            Kind::Const(a) => (a, false),
            _ => {
                let floored = r2 < EPS_FLOOR * EPS_FLOOR;
                let r2 = if floored { EPS_FLOOR * EPS_FLOOR } else { r2 };
                let v = match self.kind {
                    Kind::Phi => C_D3 / r2.sqrt(),
                    Kind::Log => 0.5 * r2.ln(),
                    Kind::GBar => crate::kernels::gbar_radial(r2.sqrt()),
                    Kind::LogPlus => log_plus_inv(r2.sqrt()),
                    Kind::InvSq => 1.0 / r2,
                    _ => unreachable!(),
                };
                (v, floored)
            }
        }
    }
}

/// Weighted empirical measure X_t^N.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub time: f64,
    pub dim: usize,
    pub unit_mass: f64,
    positions: Vec<[f64; 3]>,
}

/// What to do when a singular kernel is evaluated exactly at its center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityPolicy {
    Error,
    Floor,
}

impl ParticleCloud {
    pub fn new(dim: usize, unit_mass: f64, positions: Vec<[f64; 3]>) -> Self {
        Self {
            time: 0.0,
            dim,
            unit_mass,
            positions,
        }
    }

    /// Particles placed on the atoms of μ, round(aᵢN) per atom.
    pub fn from_measure(mu: &AtomicMeasure, n_init: usize) -> Self {
        let mut positions = Vec::new();
        for a in mu.atoms() {
            let k = (a.mass * n_init as f64).round() as usize;
            positions.extend(std::iter::repeat_n(a.at.raw(), k));
        }
        Self::new(mu.dim(), 1.0 / n_init as f64, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }

    /// X_t(1).
    pub fn mass(&self) -> f64 {
        self.positions.len() as f64 * self.unit_mass
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn points(&self) -> Vec<SpacePoint> {
        self.positions
            .iter()
            .map(|p| SpacePoint::new(&p[..self.dim]).expect("finite particle position"))
            .collect()
    }

    pub(crate) fn positions_mut(&mut self) -> &mut Vec<[f64; 3]> {
        &mut self.positions
    }
}

/// X_t(φ) = unit_mass · Σ φ(position).
pub fn measure_apply(cloud: &ParticleCloud, kernel: &KernelDescriptor, policy: SingularityPolicy) -> Result<f64> {
    let c = Compiled::new(kernel, cloud.dim);
    let mut s = 0.0;
    for p in cloud.positions() {
        let (v, floored) = c.eval(p);
        if floored && policy == SingularityPolicy::Error {
            let exact = kernel
                .center()
                .map(|z| {
                    let q = z.raw();
                    p[0] == q[0] && p[1] == q[1] && p[2] == q[2]
                })
                .unwrap_or(false);
            if exact {
                return Err(Error::Singular);
            }
        }
        s += v;
    }
    Ok(s * cloud.unit_mass)
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extinction {
    /// Total mass hit zero at this time.
    Extinct(f64),
    /// Still alive at the finite horizon.
    Alive(f64),
    /// Still alive at the run-to-extinction cap.
    Censored(f64),
}

impl Extinction {
    pub fn time(&self) -> f64 {
        match *self {
            Extinction::Extinct(t) | Extinction::Alive(t) | Extinction::Censored(t) => t,
        }
    }

    pub fn zeta(&self) -> Option<f64> {
        match *self {
            Extinction::Extinct(t) => Some(t),
            _ => None,
        }
    }
}

/// Per-kernel state at one time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    /// X_t(φ_j)
    pub value: Vec<f64>,
    /// ∫₀ᵗ X_s(φ_j) ds, trapezoid over steps
    pub occupation: Vec<f64>,
    /// Branching martingale Σ (ξ − 1)·unit_mass·φ_j(particle)
    pub martingale: Vec<f64>,
    /// Predictable bracket of the branching martingale
    pub bracket: Vec<f64>,
    /// Realized quadratic variation Σ (ΔM)²
    pub realized_qv: Vec<f64>,
}

impl Functionals {
    fn zeros(n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            occupation: vec![0.0; n],
            martingale: vec![0.0; n],
            bracket: vec![0.0; n],
            realized_qv: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub mass: f64,
    pub functionals: Functionals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 3]>>,
}

/// Everything recorded along one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub config_hash: String,
    pub replicate: u64,
    pub dim: usize,
    pub unit_mass: f64,
    pub dt: f64,
    pub kernels: Vec<KernelDescriptor>,
    /// X_0(φ_j)
    pub initial: Vec<f64>,
    /// State when the simulation stopped.
    pub terminal: Functionals,
    pub end: Extinction,
    pub snapshots: Vec<Snapshot>,
    /// ∫₀ᵗ X_s(1) ds up to the stopping time.
    pub mass_occupation: f64,
    /// Evaluations that hit the singularity floor, per kernel.
    pub floor_hits: Vec<u64>,
    pub particle_steps: u64,
    pub max_particles: usize,
}

impl PathRecord {
    fn check(&self, id: KernelId) -> Result<()> {
        if id.0 < self.kernels.len() {
            Ok(())
        } else {
            Err(Error::Unregistered(id.0))
        }
    }

    /// Functionals at time t: a snapshot, the terminal state, or (after
    /// extinction) the frozen terminal state.
    pub fn at(&self, t: f64) -> Result<&Functionals> {
        let tol = 1e-9 * self.dt.max(1e-300) + 1e-12;
        if let Some(s) = self.snapshots.iter().find(|s| (s.t - t).abs() <= 0.5 * self.dt + tol) {
            return Ok(&s.functionals);
        }
        if (self.end.time() - t).abs() <= 0.5 * self.dt + tol {
            return Ok(&self.terminal);
        }
        if matches!(self.end, Extinction::Extinct(z) if t >= z) {
            return Ok(&self.terminal);
        }
        Err(Error::Domain(format!("time {t} was not recorded on this path")))
    }

    /// Occupation integral ∫₀^T X_s(φ)ds up to the stopping time.
    pub fn occupation_integral(&self, id: KernelId) -> Result<f64> {
        self.check(id)?;
        Ok(self.terminal.occupation[id.0])
    }

    pub fn occupation_at(&self, id: KernelId, t: f64) -> Result<f64> {
        self.check(id)?;
        Ok(self.at(t)?.occupation[id.0])
    }

    pub fn value_at(&self, id: KernelId, t: f64) -> Result<f64> {
        self.check(id)?;
        Ok(self.at(t)?.value[id.0])
    }

    pub fn martingale_at(&self, id: KernelId, t: f64) -> Result<f64> {
        self.check(id)?;
        Ok(self.at(t)?.martingale[id.0])
    }

    pub fn initial_value(&self, id: KernelId) -> Result<f64> {
        self.check(id)?;
        Ok(self.initial[id.0])
    }

    pub fn mass_at(&self, t: f64) -> Result<f64> {
        if let Some(s) = self.snapshots.iter().find(|s| (s.t - t).abs() <= 0.5 * self.dt) {
            return Ok(s.mass);
        }
        match self.end {
            Extinction::Extinct(z) if t >= z => Ok(0.0),
            _ => Err(Error::Domain(format!("mass at time {t} was not recorded"))),
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("record serializes").as_bytes())
    }

    /// Write the retained snapshot positions as CSV rows (t, particle, x, y, z).
    pub fn write_positions_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "particle", "x", "y", "z"])?;
        for s in &self.snapshots {
            if let Some(ps) = &s.positions {
                for (i, p) in ps.iter().enumerate() {
                    out.write_record([
                        s.t.to_string(),
                        i.to_string(),
                        p[0].to_string(),
                        p[1].to_string(),
                        p[2].to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_large_steps() {
        let mut c = SimConfig::new(3, 100, 0.01, Horizon::Finite(1.0));
        assert!(c.validate().is_err());
        c.dt = SimConfig::max_dt(100);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_json_is_strict() {
        let ok = r#"{"dim":3,"n_init":10,"dt":0.01,"horizon":{"finite":1.0}}"#;
        let c: SimConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(c.t_cap, DEFAULT_T_CAP);
        let bad = r#"{"dim":3,"n_init":10,"dt":0.01,"horizon":"infinite","nn":1}"#;
        let e = serde_json::from_str::<SimConfig>(bad).unwrap_err().to_string();
        assert!(e.contains("nn"), "{e}");
    }

    #[test]
    fn measure_apply_basics() {
        let empty = ParticleCloud::new(3, 0.1, Vec::new());
        let k = KernelDescriptor::Const { a: 2.5 };
        assert_eq!(measure_apply(&empty, &k, SingularityPolicy::Error).unwrap(), 0.0);
        let cloud = ParticleCloud::new(3, 0.1, vec![[0.1, 0.0, 0.0], [0.0, 0.2, 0.0], [1.0, 1.0, 1.0]]);
        let v = measure_apply(&cloud, &k, SingularityPolicy::Error).unwrap();
        assert!((v - 2.5 * cloud.mass()).abs() < 1e-15);
        let phi = KernelDescriptor::Phi {
            center: SpacePoint::new(&[1.0, 1.0, 1.0]).unwrap(),
        };
        assert!(matches!(
            measure_apply(&cloud, &phi, SingularityPolicy::Error),
            Err(Error::Singular)
        ));
        assert!(measure_apply(&cloud, &phi, SingularityPolicy::Floor).unwrap().is_finite());
    }

    #[test]
    fn compiled_matches_descriptor() {
        let c = SpacePoint::new(&[0.3, -0.1, 0.2]).unwrap();
        let ks = [
            KernelDescriptor::Heat { t: 0.7, center: c },
            KernelDescriptor::Mollified { center: c, eps: 0.02 },
            KernelDescriptor::Phi { center: c },
            KernelDescriptor::LogK { center: c },
            KernelDescriptor::GBar { center: c },
            KernelDescriptor::LogPlus { center: c },
            KernelDescriptor::InvSq { center: c },
            KernelDescriptor::Const { a: -1.5 },
        ];
        let y = SpacePoint::new(&[0.1, 0.2, 0.25]).unwrap();
        for k in ks {
            let a = Compiled::new(&k, 3).eval(&y.raw()).0;
            let b = k.eval(&y);
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{k:?}: {a} {b}");
        }
    }

    #[test]
    fn atomic_measure_potentials() {
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
        let x = SpacePoint::on_axis(3, 0.25);
        let want = 0.5 * C_D3 / 0.25 + 0.5 * C_D3 / 0.75;
        assert!((mu.newtonian(&x).finite().unwrap() - want).abs() < 1e-15);
        assert!(mu.newtonian(&SpacePoint::origin(3)).finite().is_none());
        assert!(AtomicMeasure::new(vec![]).is_err());
    }
}
