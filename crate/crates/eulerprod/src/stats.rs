//! Statistical utilities: seeded RNG streams, binomial confidence
//! intervals, bootstrap resampling, weighted least squares, log-sum-exp.

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Wilson,
    Bootstrap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl CiEstimate {
    pub fn overlaps(&self, other: &CiEstimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Wilson score interval for a binomial proportion. Behaves sensibly at
/// the hits=0 and hits=n boundaries, which normal-approximation
/// intervals do not.
pub fn wilson_interval(hits: u64, n: u64, level: f64) -> Result<CiEstimate> {
    if n == 0 || hits > n {
        return Err(Error::Domain(format!("wilson_interval: hits={hits} n={n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("wilson_interval: level={level}")));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    Ok(CiEstimate { point: p, lo, hi, level, method: CiMethod::Wilson })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapRatio {
    pub ci: CiEstimate,
    /// Resamples discarded because the denominator mean was zero.
    pub excluded: usize,
}

/// Percentile bootstrap CI for mean(a)/mean(b).
pub fn bootstrap_ratio(
    a: &[f64],
    b: &[f64],
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapRatio> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("bootstrap_ratio: empty input".into()));
    }
    let point = mean(a) / mean(b);
    let mut rng = stream(seed, "bootstrap-ratio", 0);
    let mut ratios = Vec::with_capacity(n_resamples);
    let mut excluded = 0usize;
    for _ in 0..n_resamples {
        let ma = resample_mean(a, &mut rng);
        let mb = resample_mean(b, &mut rng);
        if mb == 0.0 {
            excluded += 1;
        } else {
            ratios.push(ma / mb);
        }
    }
    Ok(BootstrapRatio { ci: percentile_ci(point, &mut ratios, 0.95), excluded })
}

/// Percentile bootstrap CI for the mean.
pub fn bootstrap_mean(xs: &[f64], n_resamples: usize, seed: u64) -> Result<CiEstimate> {
    if xs.is_empty() {
        return Err(Error::Domain("bootstrap_mean: empty input".into()));
    }
    let mut rng = stream(seed, "bootstrap-mean", 0);
    let mut means: Vec<f64> = (0..n_resamples).map(|_| resample_mean(xs, &mut rng)).collect();
    Ok(percentile_ci(mean(xs), &mut means, 0.95))
}

/// Percentile bootstrap CI for the q-quantile.
pub fn bootstrap_quantile(
    xs: &[f64],
    q: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<CiEstimate> {
    if xs.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain("bootstrap_quantile: bad input".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let point = quantile_sorted(&sorted, q);
    let mut rng = stream(seed, "bootstrap-quantile", 0);
    let mut vals = Vec::with_capacity(n_resamples);
    let mut buf = vec![0.0; xs.len()];
    for _ in 0..n_resamples {
        for slot in buf.iter_mut() {
            *slot = xs[rng.random_range(0..xs.len())];
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.push(quantile_sorted(&buf, q));
    }
    Ok(percentile_ci(point, &mut vals, 0.95))
}

/// Weighted least-squares line fit; returns (slope, stderr of slope).
pub fn wls_slope(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::Domain("wls_slope: length mismatch".into()));
    }
    if x.len() < 3 {
        return Err(Error::Domain("wls_slope: need at least 3 points".into()));
    }
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return Err(Error::Domain("wls_slope: weights must be positive".into()));
    }
    let sw: f64 = w.iter().sum();
    let xbar = x.iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>() / sw;
    let ybar = y.iter().zip(w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(xi, wi)| wi * (xi - xbar) * (xi - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::RankDeficient);
    }
    let sxy: f64 =
        x.iter().zip(y).zip(w).map(|((xi, yi), wi)| wi * (xi - xbar) * (yi - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let dof = (x.len() - 2) as f64;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((xi, yi), wi)| {
            let r = yi - intercept - slope * xi;
            wi * r * r
        })
        .sum();
    let stderr = (ssr / dof / sxx).sqrt();
    Ok((slope, stderr))
}

/// log(sum exp(xs)) computed stably.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn resample_mean(xs: &[f64], rng: &mut Pcg64Mcg) -> f64 {
    let n = xs.len();
    let mut s = 0.0;
    for _ in 0..n {
        s += xs[rng.random_range(0..n)];
    }
    s / n as f64
}

fn percentile_ci(point: f64, vals: &mut [f64], level: f64) -> CiEstimate {
    if vals.is_empty() {
        // Every resample was excluded; degenerate interval at the point.
        return CiEstimate { point, lo: point, hi: point, level, method: CiMethod::Bootstrap };
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    CiEstimate {
        point,
        lo: quantile_sorted(vals, tail),
        hi: quantile_sorted(vals, 1.0 - tail),
        level,
        method: CiMethod::Bootstrap,
    }
}

/// Compensated (Neumaier) summation with a fixed traversal order, used
/// where bit-reproducibility of cached values matters.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Counter-style RNG stream keyed by (master seed, purpose tag, index).
/// Modules never share generator state: every (tag, index) pair owns an
/// independent stream, so parallel execution order cannot change draws.
pub fn stream(master: u64, tag: &str, index: u64) -> Pcg64Mcg {
    let mut state = master ^ fnv1a(tag.as_bytes()).rotate_left(17);
    let a = splitmix64(&mut state);
    let mut state2 = a ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let b = splitmix64(&mut state2);
    Pcg64Mcg::seed_from_u64(b)
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_boundaries() {
        let ci = wilson_interval(0, 50, 0.95).unwrap();
        assert_eq!(ci.lo, 0.0);
        assert!(ci.hi > 0.0);
        let ci = wilson_interval(50, 50, 0.95).unwrap();
        assert_eq!(ci.hi, 1.0);
        assert!(ci.lo < 1.0);
        assert!(wilson_interval(5, 0, 0.95).is_err());
        assert!(wilson_interval(6, 5, 0.95).is_err());
    }

    #[test]
    fn wilson_half() {
        let ci = wilson_interval(50, 100, 0.95).unwrap();
        assert!(ci.lo > 0.40 && ci.hi < 0.60);
        assert!(ci.lo <= 0.5 && 0.5 <= ci.hi);
        assert_eq!(ci.point, 0.5);
    }

    #[test]
    fn wilson_coverage_simulated() {
        // n=1e3, p=0.1: empirical coverage over 1e4 trials must be >= 93%.
        let p = 0.1;
        let n = 1000u64;
        let trials = 10_000;
        let mut covered = 0;
        let mut rng = stream(7, "wilson-coverage", 0);
        for _ in 0..trials {
            let mut hits = 0u64;
            for _ in 0..n {
                if rng.random::<f64>() < p {
                    hits += 1;
                }
            }
            let ci = wilson_interval(hits, n, 0.95).unwrap();
            if ci.lo <= p && p <= ci.hi {
                covered += 1;
            }
        }
        assert!(covered as f64 / trials as f64 >= 0.93, "coverage {covered}/{trials}");
    }

    #[test]
    fn bootstrap_ratio_identical_and_constant() {
        let a: Vec<f64> = (0..200).map(|i| 1.0 + (i % 7) as f64).collect();
        let r = bootstrap_ratio(&a, &a, 500, 1).unwrap();
        assert!(r.ci.lo <= 1.0 && 1.0 <= r.ci.hi);
        assert!(r.ci.hi - r.ci.lo < 0.3);

        let two = vec![2.0; 50];
        let one = vec![1.0; 50];
        let r = bootstrap_ratio(&two, &one, 200, 1).unwrap();
        assert_eq!(r.ci.point, 2.0);
        assert_eq!(r.ci.lo, 2.0);
        assert_eq!(r.ci.hi, 2.0);
        assert_eq!(r.excluded, 0);
    }

    #[test]
    fn bootstrap_seed_determinism() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64).sin() + 2.0).collect();
        let b: Vec<f64> = (0..100).map(|i| (i as f64).cos() + 3.0).collect();
        let r1 = bootstrap_ratio(&a, &b, 300, 99).unwrap();
        let r2 = bootstrap_ratio(&a, &b, 300, 99).unwrap();
        assert_eq!(r1.ci.lo, r2.ci.lo);
        assert_eq!(r1.ci.hi, r2.ci.hi);
    }

    #[test]
    fn bootstrap_zero_denominator_excluded() {
        let a = vec![1.0; 10];
        let b = vec![0.0; 10];
        let r = bootstrap_ratio(&a, &b, 50, 3).unwrap();
        assert_eq!(r.excluded, 50);
    }

    #[test]
    fn wls_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|xi| -2.0 * xi).collect();
        let w = [1.0, 2.0, 3.0, 4.0];
        let (slope, stderr) = wls_slope(&x, &y, &w).unwrap();
        assert!((slope + 2.0).abs() < 1e-14);
        assert!(stderr.abs() < 1e-14);
    }

    #[test]
    fn wls_three_point_normal_equations() {
        // Hand evaluation: x = (0,1,2), y = (0,1,3), w = (1,1,2).
        // xbar = 5/4, ybar = 7/4, Sxx = 1*(25/16)+1*(1/16)+2*(9/16) = 44/16,
        // Sxy = 1*(-5/4)(-7/4)+1*(-1/4)(-3/4)+2*(3/4)(5/4) = 68/16,
        // slope = 68/44 = 17/11.
        let (slope, _) = wls_slope(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0], &[1.0, 1.0, 2.0]).unwrap();
        assert!((slope - 17.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn wls_permutation_invariance() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.1, -2.2, -3.9, -6.1];
        let w = [1.0, 2.0, 1.5, 0.5];
        let (s1, e1) = wls_slope(&x, &y, &w).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let wp: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let (s2, e2) = wls_slope(&xp, &yp, &wp).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_stability() {
        let xs = [1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn streams_are_independent_and_deterministic() {
        let mut a1 = stream(1, "x", 0);
        let mut a2 = stream(1, "x", 0);
        let mut b = stream(1, "x", 1);
        let mut c = stream(1, "y", 0);
        let va1: f64 = a1.random();
        let va2: f64 = a2.random();
        let vb: f64 = b.random();
        let vc: f64 = c.random();
        assert_eq!(va1, va2);
        assert_ne!(va1, vb);
        assert_ne!(va1, vc);
    }
}
