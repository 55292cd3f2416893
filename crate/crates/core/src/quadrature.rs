//! Gauss–Legendre rules and adaptive panel integration.
//!
//! All integrators here are deterministic: the same integrand and bounds
//! always produce bit-identical results.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are found by Newton iteration on the three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule used by the adaptive integrator.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// User-facing quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Nodes per panel (at least 16).
    pub nodes: usize,
    /// Grade panels geometrically toward singular endpoints.
    pub log_spaced: bool,
    /// Truncation radius in units of sqrt(t) beyond the kernel center.
    pub trunc_sigmas: f64,
    /// Smallest radius resolved near a singular point.
    pub r_min: f64,
    /// Absolute tolerance.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 16,
            log_spaced: true,
            trunc_sigmas: 12.0,
            r_min: 1e-10,
            tol: 1e-11,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 {
            return Err(Error::Config("quadrature.nodes must be at least 16".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("quadrature.tol must be positive".into()));
        }
        if !(self.r_min > 0.0) || !(self.trunc_sigmas > 0.0) {
            return Err(Error::Config(
                "quadrature.r_min and quadrature.trunc_sigmas must be positive".into(),
            ));
        }
        Ok(())
    }

    fn rule(&self) -> GaussLegendre {
        GaussLegendre::new(self.nodes)
    }
}

const MAX_DEPTH: usize = 48;
const EVAL_BUDGET: usize = 200_000;

struct Adaptive<'a, F> {
    f: &'a F,
    rule: &'a GaussLegendre,
    failed: bool,
    worst: f64,
    evals: usize,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    fn run(&mut self, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.rule.integrate(self.f, a, m);
        let right = self.rule.integrate(self.f, m, b);
        let both = left + right;
        let err = (both - whole).abs();
        self.evals += 2;
        if err <= tol || err <= 8.0 * f64::EPSILON * (left.abs() + right.abs()) || m <= a || m >= b {
            return both;
        }
        if self.evals > EVAL_BUDGET {
            self.failed = true;
            self.worst = self.worst.max(err);
            return both;
        }
        if depth >= MAX_DEPTH {
            self.failed = true;
            self.worst = self.worst.max(err);
            return both;
        }
        let t = 0.5 * tol;
        self.run(a, m, left, t, depth + 1) + self.run(m, b, right, t, depth + 1)
    }
}

/// Adaptive bisection with a fixed Gauss–Legendre rule per panel.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_with(f, a, b, tol, gl16())
}

fn adaptive_with<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    rule: &GaussLegendre,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = rule.integrate(f, a, b);
    let mut ad = Adaptive {
        f,
        rule,
        failed: false,
        worst: 0.0,
        evals: 0,
    };
    let v = ad.run(a, b, whole, tol, 0);
    if !v.is_finite() {
        return Err(Error::Tolerance {
            a,
            b,
            tol,
            estimate: v,
            error: f64::INFINITY,
        });
    }
    if ad.failed && ad.worst > 1e3 * tol {
        return Err(Error::Tolerance {
            a,
            b,
            tol,
            estimate: v,
            error: ad.worst,
        });
    }
    Ok(v)
}

/// Panels on [a, b] graded geometrically toward both endpoints, down to
/// width `r_min`. Endpoint singularities that are integrable are resolved
/// without relying on deep bisection.
pub fn graded_panels(a: f64, b: f64, r_min: f64) -> Vec<(f64, f64)> {
    let m = 0.5 * (a + b);
    let half = m - a;
    if half <= 0.0 {
        return Vec::new();
    }
    let mut cuts = vec![a];
    let mut w = half;
    let mut inner = Vec::new();
    while w > r_min.max(half * 1e-15) {
        w *= 0.5;
        inner.push(w);
    }
    for w in inner.iter().rev() {
        cuts.push(a + w);
    }
    cuts.push(m);
    for w in &inner {
        cuts.push(b - w);
    }
    cuts.push(b);
    cuts.dedup();
    cuts.windows(2)
        .filter(|p| p[1] > p[0])
        .map(|p| (p[0], p[1]))
        .collect()
}

/// Integrate over [points[0], points[last]] with breakpoints at every
/// interior point; each segment is graded toward its ends.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: &F, points: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let rule = if spec.nodes == 16 {
        None
    } else {
        Some(spec.rule())
    };
    let rule = rule.as_ref().unwrap_or_else(|| gl16());
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    pts.dedup();
    let mut panels = Vec::new();
    for w in pts.windows(2) {
        if spec.log_spaced {
            panels.extend(graded_panels(w[0], w[1], spec.r_min));
        } else {
            panels.push((w[0], w[1]));
        }
    }
    if panels.is_empty() {
        return Ok(0.0);
    }
    let tol = spec.tol / panels.len() as f64;
    let mut total = 0.0;
    for (a, b) in panels {
        total += adaptive_with(f, a, b, tol, rule)?;
    }
    Ok(total)
}

/// Composite trapezoid weights for a uniform grid of `n + 1` points.
pub fn trapezoid_uniform(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let g = GaussLegendre::new(8);
        // degree 15 is the highest exact degree for 8 nodes
        let v = g.integrate(&|x: f64| x.powi(14) + x.powi(15), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = g.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sixteen_point_nodes_are_symmetric_and_sorted() {
        let g = gl16();
        for i in 0..g.len() {
            assert!((g.nodes()[i] + g.nodes()[g.len() - 1 - i]).abs() < 1e-15);
        }
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let spec = QuadratureSpec::default();
        let v = integrate_breaks(&|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let l = integrate_breaks(&|x: f64| x.ln(), &[0.0, 1.0], &spec).unwrap();
        assert!((l + 1.0).abs() < 1e-9, "{l}");
    }

    #[test]
    fn interior_log_singularity() {
        let spec = QuadratureSpec::default();
        let v = integrate_breaks(&|x: f64| (x - 0.3).abs().ln(), &[0.0, 0.3, 1.0], &spec).unwrap();
        let exact = 0.3 * (0.3f64.ln() - 1.0) + 0.7 * (0.7f64.ln() - 1.0);
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_on_linear_is_exact() {
        let vals: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        assert!((trapezoid_uniform(&vals, 0.1) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        let mut s = QuadratureSpec::default();
        assert!(s.validate().is_ok());
        s.nodes = 8;
        assert!(s.validate().is_err());
    }
}
