//! Second-order cumulant against an independent tensor quadrature.

use std::f64::consts::PI;

use sbm_core::cumulants::{v_recursion, CumulantGrid};
use sbm_core::{KernelDescriptor, SpacePoint};
use statrs::function::erf::erf;

/// Composite Simpson on [a, b] with an even number of panels.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// ∫₀ˢ P_u(1/|·|)(ρ) du with P_u(1/|·|)(ρ) = erf(ρ/√(2u))/ρ; u = s·w² removes the corner at u = 0.
fn v1(s: f64, rho: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let rho = rho.max(1e-12);
    simpson(0.0, 1.0, 64, |w| {
        if w == 0.0 {
            return 0.0;
        }
        let u = s * w * w;
        2.0 * s * w * erf(rho / (2.0 * u).sqrt()) / rho
    })
}

/// E f(|ρ₀e + W|) for W ~ N(0, σ²I₃), from the density of the distance.
fn radial_mean(rho0: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    let lo = (rho0 - 9.0 * sigma).max(0.0);
    let hi = rho0 + 9.0 * sigma;
    let c = 1.0 / (rho0 * sigma * (2.0 * PI).sqrt());
    simpson(lo, hi, 200, |r| {
        let g = (-(r - rho0).powi(2) / (2.0 * sigma * sigma)).exp() - (-(r + rho0).powi(2) / (2.0 * sigma * sigma)).exp();
        c * r * g * f(r)
    })
}

#[test]
fn second_cumulant_of_inverse_distance_matches_tensor_quadrature() {
    let (t, rho0) = (1.0, 0.5);
    // v₂(t, ρ₀) = ∫₀ᵗ P_{t−s}(v₁(s, ·)²)(ρ₀) ds
    let oracle = simpson(0.0, t, 80, |s| {
        let sigma = (t - s).sqrt();
        if sigma < 1e-12 {
            return v1(s, rho0).powi(2);
        }
        radial_mean(rho0, sigma, |r| v1(s, r).powi(2))
    });
    let table = v_recursion(
        &KernelDescriptor::Phi {
            center: SpacePoint::on_axis(3, rho0),
        },
        3,
        t,
        2,
        &CumulantGrid::default(),
    )
    .unwrap()
    .scaled(2.0 * PI);
    let got = table.v(2, rho0).unwrap();
    // frozen value of the oracle
    assert!((oracle - 0.357902).abs() < 2e-6, "oracle {oracle}");
    assert!((got / oracle - 1.0).abs() < 2e-3, "table {got} against {oracle}");
    let first = table.v(1, rho0).unwrap();
    assert!((first / v1(t, rho0) - 1.0).abs() < 1e-4);
}
