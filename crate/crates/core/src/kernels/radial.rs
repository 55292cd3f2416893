//! Radial reductions of Gaussian expectations.
//!
//! Two independent routes are provided. The x-centred route integrates a
//! kernel of ρ = |y − x| against the exact law of |B_t − x|. The
//! origin-centred route integrates the heat kernel (or the potential q_t)
//! in R = |y| against the spherical average of the kernel over |y| = R.

use std::f64::consts::PI;

use crate::error::Result;
use crate::quadrature::{integrate_breaks, QuadratureSpec};
use crate::special::bessel_i0e;

use super::{heat_radial, potential_radial, sphere_area};

pub type RadialFn<'a> = &'a dyn Fn(f64) -> f64;

/// Density of ρ = |B_t − x| at ρ, where B_t ~ p_t and r = |x|.
pub fn radial_density(dim: usize, t: f64, r: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let g = (-(rho - r) * (rho - r) / (2.0 * t)).exp();
    match dim {
        3 => {
            let z = 2.0 * r * rho / t;
            let base = g / (2.0 * PI * t).sqrt();
            if z < 1e-8 {
                base * 2.0 * rho * rho / t
            } else {
                base * (rho / r) * (-(-z).exp_m1())
            }
        }
        _ => (rho / t) * g * bessel_i0e(r * rho / t),
    }
}

/// E f(|B_t − x|) with |x| = r by the x-centred route.
pub fn expect_about(
    dim: usize,
    t: f64,
    r: f64,
    f: RadialFn<'_>,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    let top = r + spec.trunc_sigmas * t.sqrt();
    let mut pts = vec![0.0, r, top];
    pts.extend(breaks.iter().copied().filter(|b| *b > 0.0 && *b < top));
    integrate_breaks(&|rho| f(rho) * radial_density(dim, t, r, rho), &pts, spec)
}

/// ∫₀ᵗ E f(|B_s − x|) ds by nesting the x-centred route in time.
pub fn expect_about_time_integrated(
    dim: usize,
    t: f64,
    r: f64,
    f: RadialFn<'_>,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let failed = std::cell::Cell::new(None);
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let inner = QuadratureSpec {
            tol: spec.tol * 0.1,
            r_min: spec.r_min.max(1e-6 * s.sqrt()),
            ..*spec
        };
        match expect_about(dim, s, r, f, breaks, &inner) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e.to_string()));
                0.0
            }
        }
    };
    let time_spec = QuadratureSpec {
        r_min: (spec.r_min * t).max(1e-14),
        ..*spec
    };
    let v = integrate_breaks(&g, &[0.0, t], &time_spec)?;
    if let Some(msg) = failed.take() {
        return Err(crate::error::Error::Domain(format!("inner quadrature failed: {msg}")));
    }
    Ok(v)
}

fn shell_integral(
    dim: usize,
    weight: &dyn Fn(f64) -> f64,
    scale: f64,
    r: f64,
    avg: RadialFn<'_>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let top = r + spec.trunc_sigmas * scale;
    let area = sphere_area(dim);
    let d1 = (dim - 1) as i32;
    integrate_breaks(
        &|big_r| {
            if big_r <= 0.0 {
                0.0
            } else {
                weight(big_r) * area * big_r.powi(d1) * avg(big_r)
            }
        },
        &[0.0, r, top],
        spec,
    )
}

/// E f(B_t − x) by the origin-centred route, where `avg(R)` is the average
/// of the kernel over the sphere |y| = R.
pub fn expect_origin_shell(
    dim: usize,
    t: f64,
    r: f64,
    avg: RadialFn<'_>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    shell_integral(dim, &|big_r| heat_radial(dim, t, big_r), t.sqrt(), r, avg, spec)
}

/// ∫₀ᵗ E f(B_s − x) ds by the origin-centred route, using the closed-form
/// potential q_t(R) in place of a time integral.
pub fn expect_origin_shell_potential(
    dim: usize,
    t: f64,
    r: f64,
    avg: RadialFn<'_>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    shell_integral(dim, &|big_r| potential_radial(dim, t, big_r), t.sqrt(), r, avg, spec)
}

/// Average of |y − x|^{-α} over |y| = R in d=3, with r = |x| > 0.
pub fn shell_power_d3(alpha: f64, big_r: f64, r: f64) -> f64 {
    let hi = big_r + r;
    // a node landing exactly on the sphere |y| = r sees an integrable log pole
    let lo = (big_r - r).abs().max(f64::MIN_POSITIVE);
    if (alpha - 2.0).abs() < 1e-14 {
        (hi / lo).ln() / (2.0 * big_r * r)
    } else {
        let e = 2.0 - alpha;
        (hi.powf(e) - lo.powf(e)) / (2.0 * big_r * r * e)
    }
}

/// Average of log|y − x| over |y| = R.
pub fn shell_log(dim: usize, big_r: f64, r: f64) -> f64 {
    match dim {
        2 => big_r.max(r).ln(),
        _ => {
            let prim = |s: f64| if s > 0.0 { 0.5 * s * s * s.ln() - 0.25 * s * s } else { 0.0 };
            (prim(big_r + r) - prim((big_r - r).abs())) / (2.0 * big_r * r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities_integrate_to_one() {
        let spec = QuadratureSpec::default();
        for dim in [2, 3] {
            for (t, r) in [(0.1, 0.0), (1.0, 0.5), (10.0, 3.0), (0.01, 0.3)] {
                let m = expect_about(dim, t, r, &|_| 1.0, &[], &spec).unwrap();
                assert!((m - 1.0).abs() < 1e-10, "dim {dim} t {t} r {r}: {m}");
            }
        }
    }

    #[test]
    fn shell_average_of_inverse_distance_is_newtonian() {
        for (big_r, r) in [(0.2, 0.5), (0.9, 0.5)] {
            let v = shell_power_d3(1.0, big_r, r);
            assert!((v - 1.0 / f64::max(big_r, r)).abs() < 1e-14);
        }
    }

    #[test]
    fn routes_agree_on_inverse_distance() {
        let spec = QuadratureSpec::default();
        let a = expect_about(3, 1.0, 0.3, &|rho| 1.0 / rho, &[], &spec).unwrap();
        let b = expect_origin_shell(3, 1.0, 0.3, &|big_r| shell_power_d3(1.0, big_r, 0.3), &spec).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }
}
