//! Mean identities behind the Tanaka formulas, bounded extensions of the
//! renormalized potentials, and the d=2 resolvent kernel f_α.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_breaks, QuadratureSpec};
use crate::special::{expint_e1, EULER_MASCHERONI};

use super::radial::{expect_about, expect_origin_shell, expect_origin_shell_potential, shell_log, shell_power_d3};
use super::{check_dim, log_plus_inv, potential_radial, SpacePoint, C_D2, C_D3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Right-hand side by a second, origin-centred route.
    pub rhs_alt: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIdentityReport {
    pub dim: usize,
    pub t: f64,
    pub x_norm: f64,
    pub residuals: Vec<IdentityResidual>,
}

impl MeanIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.residual.abs().max((r.rhs - r.rhs_alt).abs()))
            .fold(0.0, f64::max)
    }
}

fn residual(name: &str, lhs: f64, rhs: f64, rhs_alt: f64) -> IdentityResidual {
    IdentityResidual {
        name: name.to_string(),
        lhs,
        rhs,
        rhs_alt,
        residual: lhs - rhs,
    }
}

/// Residuals of the expectation-level identities:
///
/// (a) d=3: ½∫₀ᵗ∫p_s(y)|y−x|⁻²dy ds = ∫p_t(y)log|y−x|dy − log|x|
/// (b) d=2: q_t(x) − (1/π)log(1/|x|) = (1/π)∫p_t(y)log|y−x|dy
/// (c) d=3: q_t(x) = 1/(2π|x|) − ∫p_t(y)/(2π|y−x|)dy
///
/// Left and right sides are computed by independent routes.
pub fn verify_mean_identities(dim: usize, t: f64, x: &SpacePoint, spec: &QuadratureSpec) -> Result<MeanIdentityReport> {
    check_dim(dim)?;
    let r = x.norm();
    if !(r > 0.0) || !(t > 0.0) {
        return Err(Error::Domain("mean identities need |x| > 0 and t > 0".into()));
    }
    let mut residuals = Vec::new();
    match dim {
        3 => {
            let lhs_a = 0.5 * expect_origin_shell_potential(3, t, r, &|big_r| shell_power_d3(2.0, big_r, r), spec)?;
            let rhs_a = expect_about(3, t, r, &|rho| rho.ln(), &[], spec)? - r.ln();
            let alt_a = expect_origin_shell(3, t, r, &|big_r| shell_log(3, big_r, r), spec)? - r.ln();
            residuals.push(residual("a", lhs_a, rhs_a, alt_a));

            let lhs_c = potential_radial(3, t, r);
            let rhs_c = C_D3 / r - C_D3 * expect_about(3, t, r, &|rho| 1.0 / rho, &[], spec)?;
            let alt_c = C_D3 / r - C_D3 * expect_origin_shell(3, t, r, &|big_r| 1.0 / big_r.max(r), spec)?;
            residuals.push(residual("c", lhs_c, rhs_c, alt_c));
        }
        _ => {
            let lhs_b = potential_radial(2, t, r) - C_D2 * (1.0 / r).ln();
            let rhs_b = C_D2 * expect_about(2, t, r, &|rho| rho.ln(), &[], spec)?;
            let alt_b = C_D2 * expect_origin_shell(2, t, r, &|big_r| shell_log(2, big_r, r), spec)?;
            residuals.push(residual("b", lhs_b, rhs_b, alt_b));
        }
    }
    Ok(MeanIdentityReport {
        dim,
        t,
        x_norm: r,
        residuals,
    })
}

/// q̄_t(r) = q_t(r) − 1/(2πr) in d=3, extended continuously to r = 0.
pub fn extension_d3(t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return extension_d3_limit(t);
    }
    // q_t − c/r = −erf(r/√(2t))/(2πr)
    -crate::special::erf(r / (2.0 * t).sqrt()) / (2.0 * PI * r)
}

/// lim_{r→0} q̄_t(r) = −2(2π)^{-3/2} t^{-1/2}.
pub fn extension_d3_limit(t: f64) -> f64 {
    -2.0 * (2.0 * PI).powf(-1.5) / t.sqrt()
}

/// q̃_t(r) = q_t(r) − (1/π)log⁺(1/r) in d=2, extended continuously to r = 0.
pub fn extension_d2(t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return extension_d2_limit(t);
    }
    potential_radial(2, t, r) - C_D2 * log_plus_inv(r)
}

/// lim_{r→0} q̃_t(r) = (log(2t) − γ)/(2π).
pub fn extension_d2_limit(t: f64) -> f64 {
    ((2.0 * t).ln() - EULER_MASCHERONI) / (2.0 * PI)
}

fn fa_quad() -> QuadratureSpec {
    QuadratureSpec {
        tol: 1e-13,
        log_spaced: false,
        ..QuadratureSpec::default()
    }
}

/// f_α(x) = ∫₀^∞ e^{−αs} p_s(x) ds − (1/π)log⁺(1/|x|) in d=2, with its
/// continuous extension at the origin.
pub fn f_alpha(alpha: f64, x: &SpacePoint) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::Domain("f_alpha is defined in d=2".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Domain("f_alpha needs alpha > 0".into()));
    }
    let r = x.norm();
    if r == 0.0 {
        return f_alpha_limit(alpha);
    }
    // s = e^u turns the time integral into a smooth bump in u
    let integrand = |u: f64| {
        let s = u.exp();
        (-alpha * s - r * r / (2.0 * s)).exp() / (2.0 * PI)
    };
    let lo = (r * r / 80.0).ln();
    let hi = (40.0 / alpha).ln().max(lo + 1.0);
    let peak = (r / (2.0 * alpha).sqrt()).ln().clamp(lo, hi);
    let v = integrate_breaks(&integrand, &[lo, peak, hi], &fa_quad())?;
    Ok(v - C_D2 * log_plus_inv(r))
}

/// The value of f_α at the origin:
/// (log 2 − γ)/(2π) + ∫₀¹ (e^{−αs} − 1)/(2πs) ds + E₁(α)/(2π).
pub fn f_alpha_limit(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("f_alpha needs alpha > 0".into()));
    }
    let j1 = 2f64.ln() / (2.0 * PI);
    let head = integrate_breaks(
        &|s: f64| {
            if s == 0.0 {
                -alpha / (2.0 * PI)
            } else {
                (-alpha * s).exp_m1() / (2.0 * PI * s)
            }
        },
        &[0.0, 1.0],
        &fa_quad(),
    )?;
    Ok(j1 - EULER_MASCHERONI / (2.0 * PI) + head + expint_e1(alpha) / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extensions_are_continuous_at_origin() {
        for t in [0.5, 1.0, 2.0] {
            let l3 = extension_d3_limit(t);
            let l2 = extension_d2_limit(t);
            for k in 1..=5 {
                let r = 10f64.powi(-k - 1);
                assert!((extension_d3(t, r) - l3).abs() < 1e-2 * r.max(1e-4));
                assert!((extension_d2(t, r) - l2).abs() < r);
            }
        }
    }

    #[test]
    fn f_alpha_is_continuous_at_origin() {
        let a = 0.7;
        let l = f_alpha_limit(a).unwrap();
        let v = f_alpha(a, &SpacePoint::on_axis(2, 1e-7)).unwrap();
        assert!((v - l).abs() < 1e-9, "{v} {l}");
    }
}
