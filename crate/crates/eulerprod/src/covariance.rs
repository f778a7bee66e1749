//! Stationary covariance of the banded field on the grid.
//!
//! The field is stationary in h, so the covariance between two grid
//! points depends only on the lag; one row of lag values determines the
//! whole symmetric Toeplitz matrix. Exact rows are prime sums
//! `sum cos(dh log p) / (2p)`; the surrogate replaces each band sum by
//! the cosine-integral `(1/2)(Ci(dh e^m) - Ci(dh e^{m-1}))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{Payload, Reader};
use crate::config::{ModelConfig, SamplingMode};
use crate::error::{Error, Result};
use crate::primes::BandTable;
use crate::special::cosine_integral;

const COV_CACHE_MAGIC: &[u8; 8] = b"EPCOVAR\0";
const COV_CACHE_VERSION: u32 = 1;

/// Diagonal jitter factor applied (once) when the factorization of a
/// positive semidefinite row fails; rounding in the prime sums can
/// produce eigenvalues of order -1e-14, and low bands are genuinely
/// rank-deficient on fine grids.
const JITTER_FACTOR: f64 = 1e-12;

/// Largest grid for which a dense factorization is attempted.
const MAX_DENSE_GRID: usize = 10_000;

fn check_range(k: u32, l: u32, t: u32) -> Result<()> {
    if k < 1 || k > l || l > t {
        return Err(Error::BandRange { k, l, t });
    }
    Ok(())
}

/// Exact covariance E[S_{k,l}(h) S_{k,l}(h + delta_h)] of the band-range
/// field, summed term by term over the table (bands k..=l inclusive,
/// ascending frequency within each band, compensated).
pub fn covariance_exact(bands: &BandTable, k: u32, l: u32, delta_h: f64) -> Result<f64> {
    check_range(k, l, bands.t)?;
    let dh = delta_h.abs();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for m in k..=l {
        let band = bands.band(m);
        for (u, w) in band.log_freqs.iter().zip(&band.weights) {
            let x = 0.5 * w * w * (dh * u).cos();
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
    }
    Ok(sum + comp)
}

/// What the covariance asymptotics predict at a given lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovPrediction {
    /// |dh| < e^{-l}: covariance is close to the variance, value
    /// (l-k+1)/2 for the inclusive band range, error O(e^{2l} dh^2).
    Near { value: f64 },
    /// |dh| > e^{-k}: decorrelated, envelope e^{-k}/|dh|.
    Far { envelope: f64 },
    /// e^{-l} <= |dh| <= e^{-k}: no prediction is made here.
    Middle,
}

pub fn covariance_asymptotic(k: u32, l: u32, delta_h: f64) -> Result<CovPrediction> {
    if k < 1 || k > l {
        return Err(Error::BandRange { k, l, t: l });
    }
    let dh = delta_h.abs();
    if dh < (-(l as f64)).exp() {
        Ok(CovPrediction::Near { value: (l - k + 1) as f64 / 2.0 })
    } else if dh > (-(k as f64)).exp() {
        Ok(CovPrediction::Far { envelope: (-(k as f64)).exp() / dh })
    } else {
        Ok(CovPrediction::Middle)
    }
}

/// Prime-number-theorem surrogate of the band-range covariance,
/// `(1/2) sum_m int_{e^{m-1}}^{e^m} cos(dh u) / u du`, evaluated through
/// the cosine integral. Exactly (l-k+1)/2 at zero lag.
pub fn covariance_surrogate(k: u32, l: u32, delta_h: f64) -> Result<f64> {
    if k < 1 || k > l {
        return Err(Error::BandRange { k, l, t: l });
    }
    let dh = delta_h.abs();
    if dh == 0.0 {
        return Ok((l - k + 1) as f64 / 2.0);
    }
    let mut sum = 0.0;
    for m in k..=l {
        let lo = ((m - 1) as f64).exp();
        let hi = (m as f64).exp();
        sum += 0.5 * (cosine_integral(dh * hi) - cosine_integral(dh * lo));
    }
    Ok(sum)
}

/// Lower-triangular Cholesky factor in packed row-major storage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CholeskyFactor {
    n: usize,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    /// x = L z.
    pub fn multiply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for (lij, zj) in row.iter().zip(&z[..=i]) {
                acc += lij * zj;
            }
            out[i] = acc;
        }
    }

    /// Frobenius norm of L L^T - A where A(i,j) = row_value(|i-j|).
    pub fn reconstruction_error(&self, lags: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let ri = self.row(i);
                let rj = self.row(j);
                let mut acc = 0.0;
                for r in 0..=j {
                    acc += ri[r] * rj[r];
                }
                let a = lags[i - j];
                let scale = if i == j { 1.0 } else { 2.0 };
                num += scale * (acc - a) * (acc - a);
                den += scale * a * a;
            }
        }
        (num / den).sqrt()
    }
}

/// First-row covariance values on the grid for one band range, plus the
/// factorization used for sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToeplitzCovariance {
    pub k: u32,
    pub l: u32,
    pub spacing: f64,
    /// values[i] = covariance at lag i * spacing; values[0] is the variance.
    pub values: Vec<f64>,
    pub factor: CholeskyFactor,
    /// Diagonal jitter that was added to factorize (0 when none needed).
    pub jitter: f64,
}

impl ToeplitzCovariance {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

fn cholesky_toeplitz(lags: &[f64], jitter: f64) -> std::result::Result<CholeskyFactor, (f64, usize)> {
    let n = lags.len();
    let mut data = vec![0.0f64; n * (n + 1) / 2];
    for i in 0..n {
        let i_start = i * (i + 1) / 2;
        for j in 0..=i {
            let a = lags[i - j] + if i == j { jitter } else { 0.0 };
            let j_start = j * (j + 1) / 2;
            let acc: f64 = data[i_start..i_start + j]
                .iter()
                .zip(&data[j_start..j_start + j])
                .map(|(x, y)| x * y)
                .sum();
            let s = a - acc;
            if i == j {
                // The failed pivot is the best cheap estimate of the most
                // negative eigenvalue, reported in the error.
                if s <= 0.0 || !s.is_finite() {
                    return Err((s, i));
                }
                data[i_start + j] = s.sqrt();
            } else {
                data[i_start + j] = s / data[j_start + j];
            }
        }
    }
    Ok(CholeskyFactor { n, data })
}

/// Compute all grid lags for the band range and factorize the implied
/// Toeplitz matrix. Lags run over covariance_exact for whichever table
/// is supplied (prime or surrogate nodes); a failed factorization gets
/// one diagonal jitter of 1e-12 * variance before erroring out.
pub fn build_toeplitz(
    bands: &BandTable,
    k: u32,
    l: u32,
    config: &ModelConfig,
) -> Result<ToeplitzCovariance> {
    build_toeplitz_on(bands, k, l, config.spacing(), config.grid_len())
}

/// Same as [`build_toeplitz`] for an explicit grid (used by experiments
/// that refine the grid on subintervals).
pub fn build_toeplitz_on(
    bands: &BandTable,
    k: u32,
    l: u32,
    spacing: f64,
    n: usize,
) -> Result<ToeplitzCovariance> {
    check_range(k, l, bands.t)?;
    if n == 0 || n > MAX_DENSE_GRID {
        return Err(Error::Config(format!(
            "dense factorization supports 1..={MAX_DENSE_GRID} grid points, got {n}"
        )));
    }
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| covariance_exact(bands, k, l, i as f64 * spacing))
        .collect::<Result<_>>()?;

    match cholesky_toeplitz(&values, 0.0) {
        Ok(factor) => {
            Ok(ToeplitzCovariance { k, l, spacing, values, factor, jitter: 0.0 })
        }
        Err(_) => {
            let jitter = JITTER_FACTOR * values[0];
            match cholesky_toeplitz(&values, jitter) {
                Ok(factor) => Ok(ToeplitzCovariance { k, l, spacing, values, factor, jitter }),
                Err((pivot, index)) => Err(Error::NotPositiveDefinite { pivot, index, jitter }),
            }
        }
    }
}

/// Per-band Toeplitz structures (k = l = m for m = 1..=t), the inputs to
/// the Toeplitz sampler.
pub fn band_toeplitz_set(bands: &BandTable, config: &ModelConfig) -> Result<Vec<ToeplitzCovariance>> {
    (1..=bands.t).map(|m| build_toeplitz(bands, m, m, config)).collect()
}

pub fn write_cov_cache(
    path: &std::path::Path,
    config: &ModelConfig,
    sieve_checksum: u64,
    covs: &[ToeplitzCovariance],
) -> Result<u64> {
    let mut p = Payload::new();
    p.put_u32(config.t);
    p.put_f64(config.alpha);
    p.put_u32(match config.mode {
        SamplingMode::ExactPrime => 0,
        SamplingMode::Surrogate => 1,
    });
    p.put_f64(config.spacing());
    p.put_u64(config.grid_len() as u64);
    p.put_u64(sieve_checksum);
    p.put_u32(covs.len() as u32);
    for c in covs {
        p.put_u32(c.k);
        p.put_u32(c.l);
        p.put_f64(c.jitter);
        p.put_f64_slice(&c.values);
    }
    p.write_to(path, COV_CACHE_MAGIC, COV_CACHE_VERSION)
}

pub struct CovCache {
    pub t: u32,
    pub alpha: f64,
    pub mode: SamplingMode,
    pub spacing: f64,
    pub n: usize,
    pub sieve_checksum: u64,
    pub rows: Vec<(u32, u32, f64, Vec<f64>)>,
}

pub fn read_cov_cache(path: &std::path::Path) -> Result<CovCache> {
    let mut r = Reader::open(path, COV_CACHE_MAGIC, COV_CACHE_VERSION)?;
    let t = r.get_u32()?;
    let alpha = r.get_f64()?;
    let mode = match r.get_u32()? {
        0 => SamplingMode::ExactPrime,
        1 => SamplingMode::Surrogate,
        other => return Err(Error::Cache(format!("unknown mode tag {other}"))),
    };
    let spacing = r.get_f64()?;
    let n = r.get_u64()? as usize;
    let sieve_checksum = r.get_u64()?;
    let n_rows = r.get_u32()?;
    let mut rows = Vec::with_capacity(n_rows as usize);
    for _ in 0..n_rows {
        let k = r.get_u32()?;
        let l = r.get_u32()?;
        let jitter = r.get_f64()?;
        let values = r.get_f64_vec()?;
        rows.push((k, l, jitter, values));
    }
    Ok(CovCache { t, alpha, mode, spacing, n, sieve_checksum, rows })
}

/// Rebuild sampling-ready Toeplitz structures from cached rows
/// (refactorizes; the factor itself is not cached).
pub fn toeplitz_from_cache(cache: &CovCache) -> Result<Vec<ToeplitzCovariance>> {
    cache
        .rows
        .iter()
        .map(|(k, l, _, values)| match cholesky_toeplitz(values, 0.0) {
            Ok(factor) => Ok(ToeplitzCovariance {
                k: *k,
                l: *l,
                spacing: cache.spacing,
                values: values.clone(),
                factor,
                jitter: 0.0,
            }),
            Err(_) => {
                let jitter = JITTER_FACTOR * values[0];
                match cholesky_toeplitz(values, jitter) {
                    Ok(factor) => Ok(ToeplitzCovariance {
                        k: *k,
                        l: *l,
                        spacing: cache.spacing,
                        values: values.clone(),
                        factor,
                        jitter,
                    }),
                    Err((pivot, index)) => {
                        Err(Error::NotPositiveDefinite { pivot, index, jitter })
                    }
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primes::{sieve_bands, surrogate_bands};

    fn exact_config(t: u32) -> ModelConfig {
        ModelConfig::new(t, 0.5, SamplingMode::ExactPrime).unwrap()
    }

    #[test]
    fn zero_lag_is_variance_sum() {
        let cfg = exact_config(1);
        let table = sieve_bands(&cfg).unwrap();
        let v = covariance_exact(&table, 1, 1, 0.0).unwrap();
        assert!((v - table.band(1).variance).abs() < 1e-15);
        assert!((v - 0.4220113).abs() < 1e-7);
    }

    #[test]
    fn evenness_and_band_additivity() {
        let cfg = exact_config(2);
        let table = sieve_bands(&cfg).unwrap();
        for &dh in &[0.0, 0.1, 0.7, 2.5, 9.0] {
            let c = covariance_exact(&table, 1, 2, dh).unwrap();
            let c_neg = covariance_exact(&table, 1, 2, -dh).unwrap();
            assert_eq!(c, c_neg);
            let sum: f64 = (1..=2)
                .map(|m| covariance_exact(&table, m, m, dh).unwrap())
                .sum();
            assert!((c - sum).abs() < 1e-12, "dh={dh}");
            assert!(c.abs() <= covariance_exact(&table, 1, 2, 0.0).unwrap() + 1e-12);
        }
    }

    #[test]
    fn band_range_errors() {
        let cfg = exact_config(2);
        let table = sieve_bands(&cfg).unwrap();
        assert!(covariance_exact(&table, 2, 1, 0.0).is_err());
        assert!(covariance_exact(&table, 1, 3, 0.0).is_err());
        assert!(covariance_exact(&table, 0, 1, 0.0).is_err());
    }

    #[test]
    fn asymptotic_regimes() {
        // Zero separation: near regime, (l-k+1)/2 bands of variance 1/2 each.
        match covariance_asymptotic(1, 3, 0.0).unwrap() {
            CovPrediction::Near { value } => assert_eq!(value, 1.5),
            other => panic!("expected near, got {other:?}"),
        }
        // Far: envelope e^{-1}/10 = 0.0368.
        match covariance_asymptotic(1, 3, 10.0).unwrap() {
            CovPrediction::Far { envelope } => {
                assert!((envelope - 0.036787944).abs() < 1e-8)
            }
            other => panic!("expected far, got {other:?}"),
        }
        // e^{-l} < dh < e^{-k}: middle, no prediction.
        let dh = (-2.0f64).exp();
        assert_eq!(covariance_asymptotic(1, 3, dh).unwrap(), CovPrediction::Middle);
    }

    #[test]
    fn surrogate_zero_lag_and_quadrature() {
        assert_eq!(covariance_surrogate(1, 3, 0.0).unwrap(), 1.5);
        assert_eq!(covariance_surrogate(2, 2, 0.0).unwrap(), 0.5);
        // Nonzero lags agree with adaptive quadrature of the defining
        // integral to 1e-10 per band.
        for &(k, l, dh) in &[(1u32, 1u32, 0.3), (2, 2, 1.7), (1, 3, 0.1), (3, 3, 4.0)] {
            let direct = covariance_surrogate(k, l, dh).unwrap();
            let mut oracle = 0.0;
            for m in k..=l {
                let lo = ((m - 1) as f64).exp();
                let hi = (m as f64).exp();
                oracle += 0.5
                    * crate::special::adaptive_simpson(
                        &|u: f64| (dh * u).cos() / u,
                        lo,
                        hi,
                        1e-12,
                    );
            }
            assert!((direct - oracle).abs() < 1e-10, "k={k} l={l} dh={dh}");
        }
    }

    #[test]
    fn surrogate_far_envelope() {
        // Integration by parts bounds the single-band integral by
        // 2/(dh e^{m-1}); band 2 at large lags.
        for &dh in &[5.0, 20.0, 100.0] {
            let v = covariance_surrogate(2, 2, dh).unwrap();
            assert!(v.abs() <= 2.0 / (dh * 1f64.exp()) + 1e-12, "dh={dh}");
        }
    }

    #[test]
    fn scalar_toeplitz_factor() {
        let cfg = exact_config(1);
        let table = sieve_bands(&cfg).unwrap();
        let cov = build_toeplitz_on(&table, 1, 1, cfg.spacing(), 1).unwrap();
        assert_eq!(cov.factor.n(), 1);
        let want = table.band(1).variance.sqrt();
        let mut out = [0.0];
        cov.factor.multiply(&[1.0], &mut out);
        assert!((out[0] - want).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_reconstruction_small() {
        // Band 2 at t=2 on a short grid: factor must reproduce the matrix.
        let cfg = exact_config(2);
        let table = sieve_bands(&cfg).unwrap();
        let cov = build_toeplitz_on(&table, 2, 2, cfg.spacing(), 40).unwrap();
        let mut lags = cov.values.clone();
        lags[0] += cov.jitter;
        assert!(cov.factor.reconstruction_error(&lags) < 1e-10);
    }

    #[test]
    fn rank_deficient_band_needs_one_jitter() {
        // Band 1 at t=1 holds 5 primes (rank <= 10) but the grid below has
        // more points, so plain Cholesky must fail and the documented
        // jitter must rescue it.
        let cfg = exact_config(1);
        let table = sieve_bands(&cfg).unwrap();
        let cov = build_toeplitz_on(&table, 1, 1, cfg.spacing(), 30).unwrap();
        assert!(cov.jitter > 0.0);
        let mut lags = cov.values.clone();
        lags[0] += cov.jitter;
        assert!(cov.factor.reconstruction_error(&lags) < 1e-10);
    }

    #[test]
    fn surrogate_table_covariance_matches_integral() {
        // The lattice node table approximates the cosine-integral
        // covariance; at short lags they should be close.
        let cfg = ModelConfig::new(4, 0.5, SamplingMode::Surrogate).unwrap();
        let table = surrogate_bands(&cfg).unwrap();
        for m in 1..=4u32 {
            for lag in [0usize, 1, 5, 50] {
                let dh = lag as f64 * cfg.spacing();
                let node = covariance_exact(&table, m, m, dh).unwrap();
                let integral = covariance_surrogate(m, m, dh).unwrap();
                assert!(
                    (node - integral).abs() < 5e-3,
                    "m={m} lag={lag}: node {node} vs integral {integral}"
                );
            }
        }
    }

    #[test]
    fn cov_cache_roundtrip() {
        let cfg = exact_config(2);
        let table = sieve_bands(&cfg).unwrap();
        let covs = band_toeplitz_set(&table, &cfg).unwrap();
        let dir = std::env::temp_dir().join("eulerprod-cov-cache-test");
        let path = dir.join("cov-t2.bin");
        write_cov_cache(&path, &cfg, table.checksum(), &covs).unwrap();
        let cache = read_cov_cache(&path).unwrap();
        assert_eq!(cache.t, 2);
        assert_eq!(cache.sieve_checksum, table.checksum());
        let rebuilt = toeplitz_from_cache(&cache).unwrap();
        assert_eq!(rebuilt.len(), covs.len());
        for (a, b) in rebuilt.iter().zip(&covs) {
            assert_eq!(a.values, b.values);
        }
    }
}
