//! Smooth radial cutoffs built by mollifying ball indicators, and the
//! cut-off logarithm ḡ with its companions f̄ and h̄ (d=3).

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::quadrature::{integrate_breaks, QuadratureSpec};

use super::{log_plus_inv, sphere_area, SpacePoint};

const HALF_R: f64 = 0.75;
const HALF_A: f64 = 0.25;
const TABLE_LO: f64 = 0.5;
const TABLE_HI: f64 = 1.0;
const TABLE_N: usize = 4096;

fn quad() -> QuadratureSpec {
    QuadratureSpec {
        tol: 1e-13,
        r_min: 1e-9,
        ..QuadratureSpec::default()
    }
}

fn bump(u: f64) -> f64 {
    if u < 1.0 {
        (1.0 / (u * u - 1.0)).exp()
    } else {
        0.0
    }
}

/// Normalizing constant C with ∫ C exp(1/(|x|²−1)) dx = 1 over the unit ball.
pub fn eta_norm(dim: usize) -> f64 {
    static N2: OnceLock<f64> = OnceLock::new();
    static N3: OnceLock<f64> = OnceLock::new();
    let cell = if dim == 2 { &N2 } else { &N3 };
    *cell.get_or_init(|| {
        let d1 = (dim - 1) as i32;
        let m = integrate_breaks(&|s| bump(s) * s.powi(d1), &[0.0, 1.0], &quad())
            .expect("bump normalization");
        1.0 / (sphere_area(dim) * m)
    })
}

/// η_a(s) = a^{-d} η(s/a) at radius s.
pub fn eta_a(dim: usize, a: f64, s: f64) -> f64 {
    eta_norm(dim) * bump(s / a) / a.powi(dim as i32)
}

/// Fraction of the sphere |z| = s lying inside the ball of radius R
/// centred at distance r from the origin.
fn sphere_fraction(dim: usize, big_r: f64, r: f64, s: f64) -> f64 {
    if r == 0.0 || s == 0.0 {
        return if s.max(r) < big_r { 1.0 } else { 0.0 };
    }
    let u0 = ((s * s + r * r - big_r * big_r) / (2.0 * r * s)).clamp(-1.0, 1.0);
    match dim {
        2 => u0.acos() / PI,
        _ => 0.5 * (1.0 - u0),
    }
}

/// (η_a ⋆ 1_{B_R})(x) at |x| = r.
pub fn cutoff_general(dim: usize, big_r: f64, a: f64, r: f64) -> f64 {
    if r + a <= big_r {
        return 1.0;
    }
    if r - a >= big_r {
        return 0.0;
    }
    let area = sphere_area(dim);
    let d1 = (dim - 1) as i32;
    let mut pts = vec![0.0, a];
    for b in [(r - big_r).abs(), r + big_r] {
        if b > 0.0 && b < a {
            pts.push(b);
        }
    }
    let v = integrate_breaks(
        &|s| eta_a(dim, a, s) * area * s.powi(d1) * sphere_fraction(dim, big_r, r, s),
        &pts,
        &quad(),
    )
    .expect("cutoff quadrature");
    v.clamp(0.0, 1.0)
}

/// d/dr of the d=3 cutoff by the divergence theorem: an integral of η_a
/// over the sphere |w| = R shifted by r.
fn cutoff_derivative_d3(big_r: f64, a: f64, r: f64) -> f64 {
    let lo = (big_r - r).abs();
    let hi = (big_r + r).min(a);
    if r <= 0.0 || lo >= hi {
        return 0.0;
    }
    let v = integrate_breaks(
        &|rho| {
            let u = (rho * rho - big_r * big_r - r * r) / (2.0 * big_r * r);
            eta_a(3, a, rho) * u * rho / (big_r * r)
        },
        &[lo, hi],
        &quad(),
    )
    .expect("cutoff derivative quadrature");
    2.0 * PI * big_r * big_r * v
}

/// Smooth cutoff: for N ≥ 1 the ball of radius N mollified at scale 1
/// (1 on |x| < N−1, 0 on |x| ≥ N+1); for N = 1/2 the table-backed χ_{1/2}
/// (1 on |x| < 1/2, 0 on |x| ≥ 1).
pub fn cutoff_chi(n: f64, x: &SpacePoint) -> f64 {
    let r = x.norm();
    if n == 0.5 {
        if x.dim() == 3 {
            chi_half(r)
        } else {
            cutoff_general(2, HALF_R, HALF_A, r)
        }
    } else {
        cutoff_general(x.dim(), n, 1.0, r)
    }
}

struct ChiTable {
    chi: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn table() -> &'static ChiTable {
    static T: OnceLock<ChiTable> = OnceLock::new();
    T.get_or_init(|| {
        let h = (TABLE_HI - TABLE_LO) / (TABLE_N - 1) as f64;
        let fd = 1e-5;
        let mut chi = Vec::with_capacity(TABLE_N);
        let mut d1 = Vec::with_capacity(TABLE_N);
        let mut d2 = Vec::with_capacity(TABLE_N);
        for i in 0..TABLE_N {
            let r = TABLE_LO + h * i as f64;
            chi.push(cutoff_general(3, HALF_R, HALF_A, r));
            d1.push(cutoff_derivative_d3(HALF_R, HALF_A, r));
            let up = cutoff_derivative_d3(HALF_R, HALF_A, r + fd);
            let dn = cutoff_derivative_d3(HALF_R, HALF_A, r - fd);
            d2.push((up - dn) / (2.0 * fd));
        }
        ChiTable { chi, d1, d2 }
    })
}

fn interp(v: &[f64], r: f64) -> f64 {
    let h = (TABLE_HI - TABLE_LO) / (TABLE_N - 1) as f64;
    let pos = (r - TABLE_LO) / h;
    let i = (pos.floor() as usize).min(TABLE_N - 2);
    let w = pos - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// χ_{1/2}(r) in d=3.
pub fn chi_half(r: f64) -> f64 {
    if r <= TABLE_LO {
        1.0
    } else if r >= TABLE_HI {
        0.0
    } else {
        interp(&table().chi, r)
    }
}

/// (χ, χ', χ'') of χ_{1/2} at radius r in d=3.
pub fn chi_half_derivatives(r: f64) -> (f64, f64, f64) {
    if r <= TABLE_LO {
        (1.0, 0.0, 0.0)
    } else if r >= TABLE_HI {
        (0.0, 0.0, 0.0)
    } else {
        let t = table();
        (interp(&t.chi, r), interp(&t.d1, r), interp(&t.d2, r))
    }
}

pub(crate) fn gbar_radial(r: f64) -> f64 {
    r.ln() * chi_half(r)
}

fn laplacian_gbar_radial(r: f64) -> f64 {
    let (c, c1, c2) = chi_half_derivatives(r);
    c / (r * r) + 2.0 * c1 / r + r.ln() * (c2 + 2.0 * c1 / r)
}

/// ḡ_x(y), f̄(y − x), h̄(y − x), and Δḡ_x(y). At y = x the value of ḡ is
/// singular and reported as `None`; f̄ and h̄ are 0 there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbarValues {
    pub gbar: Option<f64>,
    pub fbar: f64,
    pub hbar: f64,
    pub laplacian: Option<f64>,
}

pub fn gbar_fbar_hbar(x_center: &SpacePoint, y: &SpacePoint) -> GbarValues {
    let r = y.dist(x_center);
    if r == 0.0 {
        return GbarValues {
            gbar: None,
            fbar: 0.0,
            hbar: 0.0,
            laplacian: None,
        };
    }
    let g = gbar_radial(r);
    let lap = laplacian_gbar_radial(r);
    GbarValues {
        gbar: Some(g),
        fbar: -g - log_plus_inv(r),
        hbar: lap - 1.0 / (r * r),
        laplacian: Some(lap),
    }
}

/// sup of r²|Δḡ(r)| over a log grid of `n` radii in [r_lo, r_hi].
pub fn laplacian_gbar_constant(r_lo: f64, r_hi: f64, n: usize) -> f64 {
    let (a, b) = (r_lo.ln(), r_hi.ln());
    (0..n)
        .map(|i| {
            let r = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
            r * r * laplacian_gbar_radial(r).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_is_a_probability_density() {
        for dim in [2, 3] {
            let m = integrate_breaks(
                &|s| eta_a(dim, 0.25, s) * sphere_area(dim) * s.powi(dim as i32 - 1),
                &[0.0, 0.25],
                &quad(),
            )
            .unwrap();
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_support_properties() {
        assert_eq!(cutoff_chi(2.0, &SpacePoint::on_axis(3, 0.5)), 1.0);
        assert_eq!(cutoff_chi(2.0, &SpacePoint::on_axis(3, 4.0)), 0.0);
        let mid = chi_half(0.75);
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = chi_half(0.5 + 0.005 * i as f64);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for r in [0.55, 0.7, 0.75, 0.9] {
            let h = 1e-5;
            let fd = (cutoff_general(3, HALF_R, HALF_A, r + h) - cutoff_general(3, HALF_R, HALF_A, r - h)) / (2.0 * h);
            let an = cutoff_derivative_d3(HALF_R, HALF_A, r);
            assert!((fd - an).abs() < 1e-6, "r {r}: {fd} vs {an}");
        }
    }

    #[test]
    fn gbar_inside_and_outside() {
        let x = SpacePoint::origin(3);
        let v = gbar_fbar_hbar(&x, &SpacePoint::on_axis(3, 0.25));
        assert!((v.gbar.unwrap() - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(v.fbar, 0.0);
        assert!(v.hbar.abs() < 1e-12);
        let w = gbar_fbar_hbar(&x, &SpacePoint::on_axis(3, 2.0));
        assert_eq!(w.gbar.unwrap(), 0.0);
        assert_eq!(w.fbar, 0.0);
        assert!(gbar_fbar_hbar(&x, &x).gbar.is_none());
    }
}
