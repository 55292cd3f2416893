//! Numerical verification of the kernel inequalities.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

use super::radial::{expect_about, expect_about_time_integrated};
use super::{check_dim, log_plus_inv, sphere_area};

/// Grid of (|x|, t, α) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundGrid {
    pub x_norms: Vec<f64>,
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for BoundGrid {
    fn default() -> Self {
        Self {
            x_norms: vec![0.01, 0.05, 0.2, 0.5, 2.0],
            times: vec![0.01, 0.1, 0.5, 1.0, 4.0],
            alphas: vec![0.5, 1.0, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: String,
    pub x_norm: f64,
    pub t: f64,
    pub alpha: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub dim: usize,
    pub checks: Vec<BoundCheck>,
    /// sup over the grid of ∫p_t(y)|y−x|^{-α}dy · |x|^α, per α.
    pub empirical_power_constants: Vec<(f64, f64)>,
    /// sup over the grid of ∫p_t log⁺(1/|y−x|) / (1 + log⁺(1/|x|)).
    pub empirical_log_constant: f64,
    /// ∫₀ᵗ E|B_s|⁻¹ ds / √t at x = 0, one entry per grid time.
    pub origin_inverse_distance: Vec<(f64, f64)>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// (d/(2πe))^{d/2} ω_d: the sup over t of p_t on |y| ≥ δ, times δ^d, times
/// the sphere area.
fn gaussian_shell_constant(dim: usize) -> f64 {
    let d = dim as f64;
    (d / (2.0 * PI * E)).powf(0.5 * d) * sphere_area(dim)
}

/// Explicit constant of the power-kernel bound:
/// ∫p_t(y)|y−x|^{-α}dy ≤ 2^α [1 + (d/(2πe))^{d/2} ω_d/(d−α)] |x|^{-α}.
pub fn power_bound_constant(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    2f64.powf(alpha) * (1.0 + gaussian_shell_constant(dim) / (d - alpha))
}

/// Explicit constant C of ∫p_t log⁺(1/|y−x|) ≤ C(1 + log⁺(1/|x|)),
/// obtained by the same splitting at δ = min(|x|/2, 1).
pub fn log_bound_constant(dim: usize) -> f64 {
    let d = dim as f64;
    let k = gaussian_shell_constant(dim);
    1.0 + k / d + k / (d * d)
}

fn quad() -> QuadratureSpec {
    QuadratureSpec {
        tol: 1e-9,
        r_min: 1e-9,
        ..QuadratureSpec::default()
    }
}

fn check(bound: &str, x_norm: f64, t: f64, alpha: Option<f64>, lhs: f64, rhs: f64) -> BoundCheck {
    BoundCheck {
        bound: bound.to_string(),
        x_norm,
        t,
        alpha,
        lhs,
        rhs,
        pass: lhs.is_finite() && lhs <= rhs,
    }
}

/// Check every kernel inequality on the grid.
pub fn verify_kernel_bounds(dim: usize, grid: &BoundGrid) -> Result<BoundReport> {
    check_dim(dim)?;
    if grid.x_norms.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Domain("kernel bounds need |x| > 0".into()));
    }
    if grid.alphas.iter().any(|a| !(*a > 0.0 && *a < dim as f64)) {
        return Err(Error::Domain("alpha must lie in (0, d)".into()));
    }
    let spec = quad();
    let d = dim as f64;
    let mut checks = Vec::new();
    let mut power_sup: Vec<(f64, f64)> = grid.alphas.iter().map(|a| (*a, 0.0)).collect();
    let mut log_sup: f64 = 0.0;
    let c_log = log_bound_constant(dim);

    for &r in &grid.x_norms {
        for &t in &grid.times {
            for (i, &alpha) in grid.alphas.iter().enumerate() {
                let lhs = expect_about(dim, t, r, &|rho| rho.powf(-alpha), &[], &spec)?;
                power_sup[i].1 = power_sup[i].1.max(lhs * r.powf(alpha));
                let rhs = power_bound_constant(dim, alpha) * r.powf(-alpha);
                checks.push(check("power", r, t, Some(alpha), lhs, rhs));
            }

            let lhs = expect_about_time_integrated(dim, t, r, &|rho| 1.0 / rho, &[], &spec)?;
            let rhs = 2.0 * d.sqrt() / (d - 1.0) * t.sqrt();
            checks.push(check("inverse_distance_time", r, t, None, lhs, rhs));

            if dim == 3 {
                let lhs = expect_about_time_integrated(3, t, r, &|rho| 1.0 / (rho * rho), &[], &spec)?;
                let rhs = 2.0 * (log_plus_inv(r) + 1.0 + 3f64.sqrt() * t.sqrt());
                checks.push(check("inverse_square_time", r, t, None, lhs, rhs));
            }

            let lhs = expect_about(dim, t, r, &|rho| log_plus_inv(rho), &[1.0], &spec)?;
            log_sup = log_sup.max(lhs / (1.0 + log_plus_inv(r)));
            let rhs = c_log * (1.0 + log_plus_inv(r));
            checks.push(check("log_plus", r, t, None, lhs, rhs));
        }
    }

    let mut origin = Vec::new();
    for &t in &grid.times {
        let lhs = expect_about_time_integrated(dim, t, 0.0, &|rho| 1.0 / rho, &[], &spec)?;
        let rhs = 2.0 * d.sqrt() / (d - 1.0) * t.sqrt();
        origin.push((t, lhs / t.sqrt()));
        checks.push(check("inverse_distance_time", 0.0, t, None, lhs, rhs));
    }

    Ok(BoundReport {
        dim,
        checks,
        empirical_power_constants: power_sup,
        empirical_log_constant: log_sup,
        origin_inverse_distance: origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_constants() {
        // d=3, α=1: 2·[1 + (3/(2πe))^{3/2}·4π/2]
        let k = (3.0 / (2.0 * PI * E)).powf(1.5) * 4.0 * PI;
        assert!((power_bound_constant(3, 1.0) - 2.0 * (1.0 + k / 2.0)).abs() < 1e-14);
        assert!(log_bound_constant(2) > 1.0);
    }

    #[test]
    fn small_grid_passes() {
        let g = BoundGrid {
            x_norms: vec![0.2],
            times: vec![1.0],
            alphas: vec![1.0],
        };
        let rep = verify_kernel_bounds(3, &g).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.checks);
    }
}
