//! Gaussian, potential and logarithmic kernels with quadrature oracles.
//!
//! Heat kernels follow the convention p_t(x) = (2πt)^{-d/2} exp(-|x|²/2t)
//! everywhere, including the d=2 resolvent kernel `f_alpha`.

mod bounds;
mod cutoff;
mod identities;
mod radial;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erfc, expint_e1};

pub use bounds::{verify_kernel_bounds, BoundCheck, BoundGrid, BoundReport};
pub(crate) use cutoff::gbar_radial;
pub use cutoff::{chi_half, chi_half_derivatives, cutoff_chi, eta_norm, gbar_fbar_hbar, laplacian_gbar_constant, GbarValues};
pub use identities::{
    extension_d2, extension_d2_limit, extension_d3, extension_d3_limit, f_alpha, f_alpha_limit,
    verify_mean_identities, MeanIdentityReport,
};
pub use radial::{
    expect_about, expect_about_time_integrated, expect_origin_shell, expect_origin_shell_potential,
    radial_density, RadialFn,
};

/// Pole coefficient of the d=3 renormalization, 1/(2π).
pub const C_D3: f64 = 1.0 / (2.0 * PI);
/// Log coefficient of the d=2 renormalization, 1/π.
pub const C_D2: f64 = 1.0 / PI;
/// Variance growth rate 2c² = 1/(2π²) of the d=3 renormalization.
pub const TWO_C_SQ: f64 = 1.0 / (2.0 * PI * PI);
/// Coefficient λ²-free second-order constant 1/(4π²).
pub const SECOND_ORDER: f64 = 1.0 / (4.0 * PI * PI);

/// Floor applied to distances from a singular kernel center.
pub const EPS_FLOOR: f64 = 1e-8;

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension must be 2 or 3, got {dim}")))
    }
}

/// A point of ℝ² or ℝ³. Two-dimensional points store a zero third coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpacePoint {
    dim: usize,
    c: [f64; 3],
}

impl SpacePoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coordinates must be finite".into()));
        }
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            dim: coords.len(),
            c,
        })
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        Self { dim, c: [0.0; 3] }
    }

    /// The point (r, 0[, 0]).
    pub fn on_axis(dim: usize, r: f64) -> Self {
        assert!(dim == 2 || dim == 3);
        Self {
            dim,
            c: [r, 0.0, 0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub(crate) fn raw(&self) -> [f64; 3] {
        self.c
    }

    pub fn norm(&self) -> f64 {
        (self.c[0] * self.c[0] + self.c[1] * self.c[1] + self.c[2] * self.c[2]).sqrt()
    }

    pub fn dist(&self, o: &SpacePoint) -> f64 {
        let d = [self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

impl TryFrom<Vec<f64>> for SpacePoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpacePoint::new(&v)
    }
}

impl From<SpacePoint> for Vec<f64> {
    fn from(p: SpacePoint) -> Self {
        p.coords().to_vec()
    }
}

/// A time horizon that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// A value that is genuinely infinite in the model, tagged rather than
/// encoded as a float sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    Finite(f64),
    Infinite,
}

impl Potential {
    pub fn finite(self) -> Option<f64> {
        match self {
            Potential::Finite(v) => Some(v),
            Potential::Infinite => None,
        }
    }
}

/// Radial heat kernel p_t(r) without argument checks.
#[inline]
pub fn heat_radial(dim: usize, t: f64, r: f64) -> f64 {
    let norm = match dim {
        2 => 1.0 / (2.0 * PI * t),
        _ => (2.0 * PI * t).powf(-1.5),
    };
    norm * (-r * r / (2.0 * t)).exp()
}

/// Transition density of d-dimensional Brownian motion.
pub fn heat_kernel(dim: usize, t: f64, x: &SpacePoint) -> Result<f64> {
    check_dim(dim)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_radial(dim, t, x.norm()))
}

/// q_t(r) = ∫₀ᵗ p_s(r) ds for r > 0, from the closed forms
/// erfc(r/√(2t))/(2πr) in d=3 and E₁(r²/2t)/(2π) in d=2.
pub fn potential_radial(dim: usize, t: f64, r: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match dim {
        3 => erfc(r / (2.0 * t).sqrt()) / (2.0 * PI * r),
        _ => expint_e1(r * r / (2.0 * t)) / (2.0 * PI),
    }
}

/// Occupation potential q_t(x) = ∫₀ᵗ p_s(x) ds.
pub fn potential_q(dim: usize, t: Horizon, x: &SpacePoint) -> Result<Potential> {
    check_dim(dim)?;
    let r = x.norm();
    match t {
        Horizon::Finite(t) if t < 0.0 => Err(Error::Domain(format!("negative time {t}"))),
        Horizon::Finite(0.0) => Ok(Potential::Finite(0.0)),
        _ if r == 0.0 => Ok(Potential::Infinite),
        Horizon::Finite(t) => Ok(Potential::Finite(potential_radial(dim, t, r))),
        Horizon::Infinite => match dim {
            3 => Ok(Potential::Finite(C_D3 / r)),
            _ => Ok(Potential::Infinite),
        },
    }
}

/// Symbolic kernel description used by the simulator and the quadrature layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelDescriptor {
    /// p_t(y − center)
    Heat { t: f64, center: SpacePoint },
    /// c/|y − x| with c = 1/(2π)
    Phi { center: SpacePoint },
    /// log|y − x|
    LogK { center: SpacePoint },
    /// log|y − x| · χ_{1/2}(y − x), d=3
    GBar { center: SpacePoint },
    /// log⁺(1/|y − x|)
    LogPlus { center: SpacePoint },
    /// p_ε(y − x): the local-time mollifier, ε a time parameter
    Mollified { center: SpacePoint, eps: f64 },
    /// 1/|y − x|²
    InvSq { center: SpacePoint },
    /// constant a
    Const { a: f64 },
}

impl KernelDescriptor {
    pub fn center(&self) -> Option<SpacePoint> {
        match *self {
            KernelDescriptor::Heat { center, .. }
            | KernelDescriptor::Phi { center }
            | KernelDescriptor::LogK { center }
            | KernelDescriptor::GBar { center }
            | KernelDescriptor::LogPlus { center }
            | KernelDescriptor::Mollified { center, .. }
            | KernelDescriptor::InvSq { center } => Some(center),
            KernelDescriptor::Const { .. } => None,
        }
    }

    /// True when the kernel blows up at its center.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            KernelDescriptor::Phi { .. }
                | KernelDescriptor::LogK { .. }
                | KernelDescriptor::GBar { .. }
                | KernelDescriptor::LogPlus { .. }
                | KernelDescriptor::InvSq { .. }
        )
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(c) = self.center() {
            if c.dim() != dim {
                return Err(Error::Domain(format!(
                    "kernel center has dimension {}, expected {dim}",
                    c.dim()
                )));
            }
        }
        match *self {
            KernelDescriptor::Heat { t, .. } if !(t > 0.0) => {
                Err(Error::Domain("heat kernel time must be positive".into()))
            }
            KernelDescriptor::Mollified { eps, .. } if !(eps > 0.0) => {
                Err(Error::Domain("mollifier bandwidth must be positive".into()))
            }
            KernelDescriptor::Phi { .. } | KernelDescriptor::GBar { .. } if dim != 3 => {
                Err(Error::Domain("this kernel is defined in d=3 only".into()))
            }
            _ => Ok(()),
        }
    }

    /// Kernel as a function of the distance to its center.
    pub fn radial(&self, dim: usize, r: f64) -> f64 {
        match *self {
            KernelDescriptor::Heat { t, .. } => heat_radial(dim, t, r),
            KernelDescriptor::Phi { .. } => C_D3 / r,
            KernelDescriptor::LogK { .. } => r.ln(),
            KernelDescriptor::GBar { .. } => cutoff::gbar_radial(r),
            KernelDescriptor::LogPlus { .. } => log_plus_inv(r),
            KernelDescriptor::Mollified { eps, .. } => heat_radial(dim, eps, r),
            KernelDescriptor::InvSq { .. } => 1.0 / (r * r),
            KernelDescriptor::Const { a } => a,
        }
    }

    /// Evaluate at y; singular centers are floored at `EPS_FLOOR`.
    pub fn eval(&self, y: &SpacePoint) -> f64 {
        match self.center() {
            None => self.radial(y.dim(), 0.0),
            Some(c) => {
                let mut r = y.dist(&c);
                if self.is_singular() && r < EPS_FLOOR {
                    r = EPS_FLOOR;
                }
                self.radial(y.dim(), r)
            }
        }
    }

    /// Evaluate at y, failing instead of flooring at a singular center.
    pub fn eval_strict(&self, y: &SpacePoint) -> Result<f64> {
        if let Some(c) = self.center() {
            if self.is_singular() && y.dist(&c) == 0.0 {
                return Err(Error::Singular);
            }
        }
        Ok(self.eval(y))
    }
}

/// log⁺(1/r) = max(log(1/r), 0).
#[inline]
pub fn log_plus_inv(r: f64) -> f64 {
    if r < 1.0 {
        -r.ln()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_kernel_at_origin() {
        let v3 = heat_kernel(3, 1.0, &SpacePoint::origin(3)).unwrap();
        assert!((v3 - 0.063_493_635_934_240_97).abs() < 1e-15);
        let v2 = heat_kernel(2, 0.5, &SpacePoint::origin(2)).unwrap();
        assert!((v2 - 1.0 / PI).abs() < 1e-15);
        assert!(heat_kernel(3, 0.0, &SpacePoint::origin(3)).is_err());
    }

    #[test]
    fn potential_special_cases() {
        let x = SpacePoint::on_axis(3, 0.5);
        assert_eq!(
            potential_q(3, Horizon::Infinite, &x).unwrap(),
            Potential::Finite(1.0 / PI)
        );
        assert_eq!(
            potential_q(2, Horizon::Finite(0.0), &SpacePoint::on_axis(2, 0.5)).unwrap(),
            Potential::Finite(0.0)
        );
        assert_eq!(
            potential_q(3, Horizon::Finite(1.0), &SpacePoint::origin(3)).unwrap(),
            Potential::Infinite
        );
        assert_eq!(
            potential_q(2, Horizon::Infinite, &SpacePoint::on_axis(2, 0.5)).unwrap(),
            Potential::Infinite
        );
    }

    #[test]
    fn potential_is_monotone_in_time() {
        for dim in [2, 3] {
            let mut prev = 0.0;
            for k in 1..40 {
                let t = 0.05 * k as f64;
                let q = potential_radial(dim, t, 0.3);
                assert!(q >= prev);
                prev = q;
            }
        }
    }

    #[test]
    fn space_point_serde_roundtrip() {
        let p = SpacePoint::new(&[0.1, -0.2, 0.3]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.1,-0.2,0.3]");
        let q: SpacePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<SpacePoint>("[1.0]").is_err());
    }

    #[test]
    fn descriptor_floor_policy() {
        let c = SpacePoint::on_axis(3, 0.4);
        let k = KernelDescriptor::Phi { center: c };
        assert!(k.eval(&c).is_finite());
        assert!((k.eval(&c) - C_D3 / EPS_FLOOR).abs() < 1e-3);
        assert!(k.eval_strict(&c).is_err());
    }

    #[test]
    fn descriptor_json_tags() {
        let k: KernelDescriptor =
            serde_json::from_str(r#"{"kind":"mollified","center":[0.3,0,0],"eps":0.02}"#).unwrap();
        assert!(matches!(k, KernelDescriptor::Mollified { eps, .. } if eps == 0.02));
        assert!(serde_json::from_str::<KernelDescriptor>(r#"{"kind":"phi","centre":[0,0,0]}"#).is_err());
    }
}
