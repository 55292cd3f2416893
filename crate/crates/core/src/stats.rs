//! Sample statistics, normality and independence diagnostics, regressions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::norm_cdf;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// k-th central sample moment (biased, divisor n).
pub fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

pub fn skewness(x: &[f64]) -> f64 {
    central_moment(x, 3) / central_moment(x, 2).powf(1.5)
}

pub fn excess_kurtosis(x: &[f64]) -> f64 {
    central_moment(x, 4) / central_moment(x, 2).powi(2) - 3.0
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

pub fn summarize(x: &[f64]) -> Summary {
    let n = x.len();
    let var = if n > 1 { variance(x) } else { f64::NAN };
    Summary {
        n,
        mean: mean(x),
        var,
        se: (var / n as f64).sqrt(),
    }
}

/// Fraction p̂ of successes with its binomial standard error under the
/// hypothesised probability `p0`.
pub fn proportion_z(successes: usize, n: usize, p0: f64) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    let se = (p0 * (1.0 - p0) / n as f64).sqrt();
    (p, (p - p0) / se)
}

pub fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    if se > 0.0 {
        (estimate - target) / se
    } else if estimate == target {
        0.0
    } else {
        f64::INFINITY.copysign(estimate - target)
    }
}

/// Bootstrap standard error of `stat` with `resamples` draws.
pub fn bootstrap_se<F: Fn(&[f64]) -> f64>(x: &[f64], stat: F, resamples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let mut buf = vec![0.0; n];
    let mut vals = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = x[rng.random_range(0..n)];
        }
        vals.push(stat(&buf));
    }
    variance(&vals).sqrt()
}

/// Kolmogorov distribution tail Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub d: f64,
    pub p_value: f64,
}

/// Two-sided Kolmogorov–Smirnov test against N(0, 1).
pub fn ks_normality(samples: &[f64]) -> Result<KsResult> {
    let n = samples.len();
    if n < 50 {
        return Err(Error::Insufficient(format!("KS test needs at least 50 samples, got {n}")));
    }
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = norm_cdf(*v);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    let p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
    Ok(KsResult { n, d, p_value })
}

/// Ordinary least squares y = a + b x; returns (slope, intercept).
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Insufficient("regression needs paired data".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("degenerate regression design".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Ok((b, my - b * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// 95% percentile bootstrap interval of the slope.
    pub ci: (f64, f64),
    pub resamples: usize,
}

/// Regress per-level sample variances on x. With `paired` all levels are
/// computed from the same replicates and are resampled jointly; otherwise
/// each level is resampled on its own.
pub fn variance_regression(x: &[f64], samples: &[Vec<f64>], paired: bool, resamples: usize, seed: u64) -> Result<RegressionResult> {
    if x.len() != samples.len() {
        return Err(Error::Domain("one sample set per level is needed".into()));
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Domain("variance regression needs at least 4 distinct levels".into()));
    }
    if samples.iter().any(|s| s.len() < 3) {
        return Err(Error::Insufficient("each level needs at least 3 samples".into()));
    }
    if paired && samples.iter().any(|s| s.len() != samples[0].len()) {
        return Err(Error::Domain("paired levels must have equal sample counts".into()));
    }
    let y: Vec<f64> = samples.iter().map(|s| variance(s)).collect();
    let (slope, intercept) = ols(x, &y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut yb = vec![0.0; x.len()];
    let mut idx = Vec::new();
    let mut buf = Vec::new();
    for _ in 0..resamples {
        if paired {
            let n = samples[0].len();
            idx.clear();
            idx.extend((0..n).map(|_| rng.random_range(0..n)));
            for (j, s) in samples.iter().enumerate() {
                buf.clear();
                buf.extend(idx.iter().map(|&i| s[i]));
                yb[j] = variance(&buf);
            }
        } else {
            for (j, s) in samples.iter().enumerate() {
                buf.clear();
                buf.extend((0..s.len()).map(|_| s[rng.random_range(0..s.len())]));
                yb[j] = variance(&buf);
            }
        }
        slopes.push(ols(x, &yb)?.0);
    }
    let slope_se = variance(&slopes).sqrt();
    slopes.sort_by(|a, b| a.partial_cmp(b).expect("finite slopes"));
    let ci = (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975));
    Ok(RegressionResult {
        x: x.to_vec(),
        y,
        slope,
        intercept,
        slope_se,
        ci,
        resamples,
    })
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(x: &[f64], q: f64) -> f64 {
    let pos = q * (x.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < x.len() {
        x[i] * (1.0 - f) + x[i + 1] * f
    } else {
        x[i]
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Double-centred distance matrix, row-major.
fn centred_distances(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (a[i] - a[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n).map(|i| m[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] += all - row[i] - row[j];
        }
    }
    m
}

fn dcov2(a: &[f64], b: &[f64], n: usize, perm: &[usize]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let pi = perm[i];
        let ra = &a[i * n..(i + 1) * n];
        let rb = &b[pi * n..(pi + 1) * n];
        for j in 0..n {
            s += ra[j] * rb[perm[j]];
        }
    }
    s / (n * n) as f64
}

/// Sample distance correlation of Székely, Rizzo and Bakirov.
pub fn distance_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let ma = centred_distances(a);
    let mb = centred_distances(b);
    let id: Vec<usize> = (0..n).collect();
    dcor_from(&ma, &mb, n, &id)
}

fn dcor_from(ma: &[f64], mb: &[f64], n: usize, perm: &[usize]) -> f64 {
    let id: Vec<usize> = (0..n).collect();
    let vab = dcov2(ma, mb, n, perm);
    let vaa = dcov2(ma, ma, n, &id);
    let vbb = dcov2(mb, mb, n, &id);
    if vaa <= 0.0 || vbb <= 0.0 {
        return 0.0;
    }
    (vab.max(0.0) / (vaa * vbb).sqrt()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub name: String,
    pub pearson: f64,
    pub pearson_p: f64,
    pub dcor: f64,
    pub dcor_p: f64,
}

/// Pearson and distance correlation of z against each functional, with
/// permutation p-values from `permutations` shuffles.
pub fn independence_diag(z: &[f64], functionals: &[(String, Vec<f64>)], permutations: usize, seed: u64) -> Result<Vec<IndependenceRow>> {
    let n = z.len();
    if n < 3 {
        return Err(Error::Insufficient("independence diagnostics need at least 3 pairs".into()));
    }
    let mz = centred_distances(z);
    let mut rows = Vec::new();
    for (k, (name, f)) in functionals.iter().enumerate() {
        if f.len() != n {
            return Err(Error::Domain(format!("functional {name} is not paired with the statistic")));
        }
        let mf = centred_distances(f);
        let id: Vec<usize> = (0..n).collect();
        let p0 = pearson(z, f);
        let d0 = dcor_from(&mz, &mf, n, &id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut perm = id.clone();
        let mut shuffled = vec![0.0; n];
        let (mut hit_p, mut hit_d) = (0usize, 0usize);
        for _ in 0..permutations {
            perm.shuffle(&mut rng);
            for i in 0..n {
                shuffled[i] = f[perm[i]];
            }
            if pearson(z, &shuffled).abs() >= p0.abs() {
                hit_p += 1;
            }
            if dcor_from(&mz, &mf, n, &perm) >= d0 {
                hit_d += 1;
            }
        }
        let denom = (permutations + 1) as f64;
        rows.push(IndependenceRow {
            name: name.clone(),
            pearson: p0,
            pearson_p: (hit_p + 1) as f64 / denom,
            dcor: d0,
            dcor_p: (hit_d + 1) as f64 / denom,
        });
    }
    Ok(rows)
}

/// Standard normal draws for null calibration.
pub fn normal_samples(n: usize, seed: u64) -> Vec<f64> {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_ks_statistic() {
        let c = 0.3;
        let r = ks_normality(&vec![c; 100]).unwrap();
        let want = norm_cdf(c).max(1.0 - norm_cdf(c));
        assert!((r.d - want).abs() < 1e-12);
        assert!(ks_normality(&[0.0; 10]).is_err());
    }

    #[test]
    fn ks_detects_shift() {
        let x: Vec<f64> = normal_samples(1000, 0).iter().map(|v| v + 0.5).collect();
        assert!(ks_normality(&x).unwrap().p_value < 0.01);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.049, the familiar 5% critical value
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn noiseless_regression_recovers_slope() {
        let (b, a) = ols(&[1.0, 2.0, 3.0, 4.0], &[2.5, 4.5, 6.5, 8.5]).unwrap();
        assert!((b - 2.0).abs() < 1e-14 && (a - 0.5).abs() < 1e-14);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn distance_correlation_of_identical_samples_is_one() {
        let x = normal_samples(60, 4);
        assert!((distance_correlation(&x, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_known_data() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert!(skewness(&x).abs() < 1e-15);
    }
}
