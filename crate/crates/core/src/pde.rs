//! Radial solver for ½ΔV = ½V² − λδ₀ in d=3.
//!
//! With W = rV the equation becomes W″ = W²/r, and in s = ln r
//! W_ss − W_s = e^s W². The pole coefficient fixes W(r_min) = λ/(2π); the
//! far field is closed by W′(r_max) = 0.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SECOND_ORDER;
use crate::stats;

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub r_max: f64,
    /// Grid points.
    pub points: usize,
    pub max_iter: usize,
    /// Stop when the scaled residual falls below this.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            r_max: 10.0,
            points: 4000,
            max_iter: 60,
            tol: 1e-12,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub lambda: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Max-norm of the discrete residual divided by the scale λ/(2π·k²).
    pub residual: f64,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
}

fn residual(w: &[f64], s: &[f64], k: f64, w0: f64) -> Vec<f64> {
    let m = w.len();
    let mut r = vec![0.0; m];
    r[0] = w[0] - w0;
    let (k2, k1) = (1.0 / (k * k), 0.5 / k);
    for i in 1..m - 1 {
        r[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * k2 - (w[i + 1] - w[i - 1]) * k1 - s[i].exp() * w[i] * w[i];
    }
    r[m - 1] = 2.0 * (w[m - 2] - w[m - 1]) * k2 - s[m - 1].exp() * w[m - 1] * w[m - 1];
    r
}

/// Thomas algorithm for a tridiagonal system; `a` below, `b` on, `c` above.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Solve on a log-spaced grid of `spec.points` nodes in [r_min, r_max].
pub fn solve_radial(lambda: f64, r_min: f64, spec: &SolverSpec) -> Result<RadialSolution> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    if !(r_min > 0.0 && r_min < spec.r_max) {
        return Err(Error::Domain(format!("need 0 < r_min < r_max, got {r_min} and {}", spec.r_max)));
    }
    if spec.points < 200 {
        return Err(Error::Config("PDE grid needs at least 200 points".into()));
    }
    let m = spec.points;
    let (s0, s1) = (r_min.ln(), spec.r_max.ln());
    let k = (s1 - s0) / (m - 1) as f64;
    let s: Vec<f64> = (0..m).map(|i| s0 + k * i as f64).collect();
    let w0 = lambda / (2.0 * PI);
    let scale = w0 / (k * k);
    let mut w: Vec<f64> = s.iter().map(|si| w0 * (1.0 + r_min) / (1.0 + si.exp())).collect();
    let (k2, k1) = (1.0 / (k * k), 0.5 / k);
    let mut trace = Vec::new();
    let mut res = residual(&w, &s, k, w0);
    let mut norm = max_abs(&res) / scale;
    trace.push(norm);
    let mut it = 0;
    while norm > spec.tol {
        if it == spec.max_iter {
            return Err(Error::Newton { iterations: it, trace });
        }
        it += 1;
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut c = vec![0.0; m];
        b[0] = 1.0;
        for i in 1..m - 1 {
            a[i] = k2 + k1;
            b[i] = -2.0 * k2 - 2.0 * s[i].exp() * w[i];
            c[i] = k2 - k1;
        }
        a[m - 1] = 2.0 * k2;
        b[m - 1] = -2.0 * k2 - 2.0 * s[m - 1].exp() * w[m - 1];
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let dw = solve_tridiagonal(&a, &b, &c, &neg);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=spec.max_halvings {
            let trial: Vec<f64> = w.iter().zip(&dw).map(|(x, d)| x + step * d).collect();
            if trial.iter().all(|x| *x > 0.0) {
                let r = residual(&trial, &s, k, w0);
                let n = max_abs(&r) / scale;
                if n < norm || n <= spec.tol {
                    w = trial;
                    res = r;
                    norm = n;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        trace.push(norm);
        if !accepted {
            return Err(Error::Newton { iterations: it, trace });
        }
    }
    let r: Vec<f64> = s.iter().map(|x| x.exp()).collect();
    let v = w.iter().zip(&r).map(|(a, b)| a / b).collect();
    Ok(RadialSolution {
        lambda,
        r_min,
        r_max: spec.r_max,
        r,
        v,
        w,
        residual: norm,
        iterations: it,
        residual_trace: trace,
    })
}

impl RadialSolution {
    /// W at r by linear interpolation in ln r.
    pub fn w_at(&self, r: f64) -> Result<f64> {
        if !(r >= self.r_min * (1.0 - 1e-12) && r <= self.r_max * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("r = {r} outside [{}, {}]", self.r_min, self.r_max)));
        }
        let s0 = self.r_min.ln();
        let k = (self.r_max.ln() - s0) / (self.r.len() - 1) as f64;
        let pos = ((r.ln() - s0) / k).max(0.0);
        let i = (pos.floor() as usize).min(self.r.len() - 2);
        let f = (pos - i as f64).clamp(0.0, 1.0);
        Ok(self.w[i] * (1.0 - f) + self.w[i + 1] * f)
    }

    pub fn v_at(&self, r: f64) -> Result<f64> {
        Ok(self.w_at(r)? / r)
    }

    /// 2πr V(r)/λ, which tends to 1 at the origin.
    pub fn first_order_ratio(&self, r: f64) -> Result<f64> {
        Ok(2.0 * PI * self.w_at(r)? / self.lambda)
    }

    /// (V(r) − λ/(2πr)) / (λ² log(1/r)/(4π²)); needs r < 1.
    pub fn ratio_at(&self, r: f64) -> Result<f64> {
        if !(r < 1.0) {
            return Err(Error::Domain("second-order ratio needs r < 1".into()));
        }
        let w0 = self.lambda / (2.0 * PI);
        Ok((self.w_at(r)? - w0) / r / (self.lambda * self.lambda * SECOND_ORDER * (1.0 / r).ln()))
    }

    /// W is positive and nonincreasing in r.
    pub fn maximum_principle(&self) -> bool {
        self.w.iter().all(|x| *x > 0.0) && self.w.windows(2).all(|p| p[1] <= p[0])
    }

    /// Smallest C with |V(r) − λ/(2πr)| ≤ C(|log r| + 1) on grid points in [lo, hi].
    pub fn log_bracket_constant(&self, lo: f64, hi: f64) -> f64 {
        let w0 = self.lambda / (2.0 * PI);
        self.r
            .iter()
            .zip(&self.w)
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(r, w)| ((w - w0) / r).abs() / (r.ln().abs() + 1.0))
            .fold(0.0, f64::max)
    }

    /// Rows (r, V, W, ratio); the ratio is left empty for r ≥ 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["r", "V", "W", "ratio"])?;
        for i in 0..self.r.len() {
            let r = self.r[i];
            let ratio = if r < 1.0 {
                self.ratio_at(r).map(|x| x.to_string()).unwrap_or_default()
            } else {
                String::new()
            };
            wr.write_record(&[r.to_string(), self.v[i].to_string(), self.w[i].to_string(), ratio])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Second-order ratio at each r in `rs` (each must lie in [10·r_min, 1)).
pub fn second_order_ratio(sol: &RadialSolution, rs: &[f64]) -> Result<Vec<(f64, f64)>> {
    rs.iter()
        .map(|&r| {
            if r < 10.0 * sol.r_min * (1.0 - 1e-12) {
                return Err(Error::Domain(format!("r = {r} is within a decade of r_min")));
            }
            Ok((r, sol.ratio_at(r)?))
        })
        .collect()
}

/// Relative change of V at `r` when the grid is doubled.
pub fn refinement_change(lambda: f64, r_min: f64, spec: &SolverSpec, r: f64) -> Result<f64> {
    let a = solve_radial(lambda, r_min, spec)?;
    let fine = SolverSpec {
        points: 2 * spec.points - 1,
        ..*spec
    };
    let b = solve_radial(lambda, r_min, &fine)?;
    Ok((a.v_at(r)? / b.v_at(r)? - 1.0).abs())
}

/// Largest change of the second-order ratio at `rs` when r_max is moved.
pub fn boundary_sensitivity(lambda: f64, r_min: f64, spec: &SolverSpec, r_max_alt: f64, rs: &[f64]) -> Result<f64> {
    let a = solve_radial(lambda, r_min, spec)?;
    let span = (r_max_alt / spec.r_max).ln() / (spec.r_max / r_min).ln();
    let alt = SolverSpec {
        r_max: r_max_alt,
        points: ((spec.points as f64) * (1.0 + span)).round() as usize,
        ..*spec
    };
    let b = solve_radial(lambda, r_min, &alt)?;
    let mut worst: f64 = 0.0;
    for &r in rs {
        let (x, y) = (a.ratio_at(r)?, b.ratio_at(r)?);
        worst = worst.max(((x - y) / y).abs());
    }
    Ok(worst)
}

/// Largest relative gap between V^{cλ}(r) and c²V^λ(cr) over `rs`.
pub fn scaling_defect(lambda: f64, c: f64, r_min: f64, spec: &SolverSpec, rs: &[f64]) -> Result<f64> {
    let base = solve_radial(lambda, r_min, spec)?;
    let big = solve_radial(c * lambda, r_min, spec)?;
    let mut worst: f64 = 0.0;
    for &r in rs {
        let lhs = big.v_at(r)?;
        let rhs = c * c * base.v_at(c * r)?;
        worst = worst.max((lhs / rhs - 1.0).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub x_norm: f64,
    pub lambda: f64,
    pub replicates: usize,
    /// −log of the sample mean of exp(−λL̂).
    pub mc: f64,
    /// Delta-method standard error of `mc`.
    pub se: f64,
    pub pde: f64,
    pub z: f64,
    /// λ/(2π|x|), the first-order term.
    pub linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub rows: Vec<LaplaceRow>,
    pub censored_fraction: f64,
    pub warnings: Vec<String>,
}

/// Compare −log E exp(−λL_∞^x) with V^λ(|x|). `samples[j]` holds total
/// local-time estimates at |x| = `x_norms[j]`.
pub fn laplace_crosscheck(
    sol: &RadialSolution,
    x_norms: &[f64],
    samples: &[Vec<f64>],
    censored_fraction: f64,
) -> Result<LaplaceReport> {
    if x_norms.len() != samples.len() {
        return Err(Error::Domain("one sample set per |x| is needed".into()));
    }
    let lambda = sol.lambda;
    let mut rows = Vec::new();
    for (&x, l) in x_norms.iter().zip(samples) {
        if l.len() < 2 {
            return Err(Error::Insufficient("Laplace cross-check needs replicates".into()));
        }
        let e: Vec<f64> = l.iter().map(|v| (-lambda * v).exp()).collect();
        let s = stats::summarize(&e);
        let mc = -s.mean.ln();
        let se = s.se / s.mean;
        let pde = sol.v_at(x)?;
        rows.push(LaplaceRow {
            x_norm: x,
            lambda,
            replicates: l.len(),
            mc,
            se,
            pde,
            z: stats::z_score(mc, pde, se),
            linear: lambda / (2.0 * PI * x),
        });
    }
    let mut warnings = Vec::new();
    if censored_fraction > 0.1 {
        warnings.push(format!("{:.1}% of paths were censored", 100.0 * censored_fraction));
    }
    Ok(LaplaceReport {
        rows,
        censored_fraction,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_with_pole_boundary_value() {
        let s = solve_radial(1.0, 1e-6, &SolverSpec::default()).unwrap();
        assert!(s.residual <= 1e-12);
        assert!((s.w[0] - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(s.maximum_principle());
        let f = s.first_order_ratio(1e-5).unwrap();
        assert!((0.97..=1.03).contains(&f), "{f}");
    }

    #[test]
    fn bad_arguments() {
        assert!(solve_radial(0.0, 1e-6, &SolverSpec::default()).is_err());
        assert!(solve_radial(1.0, 20.0, &SolverSpec::default()).is_err());
        let small = SolverSpec {
            points: 50,
            ..Default::default()
        };
        assert!(matches!(solve_radial(1.0, 1e-6, &small), Err(Error::Config(_))));
    }

    #[test]
    fn tridiagonal_solve() {
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0, 0.0], &[5.0, 6.0, 5.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn newton_failure_reports_trace() {
        let spec = SolverSpec {
            max_iter: 1,
            ..Default::default()
        };
        match solve_radial(1.0, 1e-6, &spec) {
            Err(Error::Newton { iterations, trace }) => {
                assert_eq!(iterations, 1);
                assert_eq!(trace.len(), 2);
            }
            other => panic!("expected a Newton error, got {other:?}"),
        }
    }
}
