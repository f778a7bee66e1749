//! Prime sieving and the multiscale band decomposition.
//!
//! Band `m` holds the frequencies `log p` with `e^{m-1} < log p <= e^m`
//! and weights `p^{-1/2}`; each band contributes variance `(1/2) sum 1/p`
//! to the field, which tends to 1/2 by Mertens' estimate. Surrogate
//! tables replace primes by quadrature nodes on an FFT-compatible
//! frequency lattice with the same per-band mass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{Payload, Reader};
use crate::config::{ModelConfig, SamplingMode};
use crate::error::{Error, Result};
use crate::stats::compensated_sum;

const BAND_CACHE_MAGIC: &[u8; 8] = b"EPBANDS\0";
const BAND_CACHE_VERSION: u32 = 1;

/// Extra periodic headroom, in units of h, between the largest grid lag
/// and the synthesis period of the surrogate frequency lattice. Keeps
/// wrap-around covariance contamination below ~2/MARGIN in absolute
/// terms (the far-regime envelope summed over bands).
const LATTICE_MARGIN_H: f64 = 50.0;

/// One multiscale band: frequencies ascending, weights aligned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Band {
    /// Band index m in 1..=t.
    pub index: u32,
    /// log p for primes, or lattice frequencies for surrogate nodes.
    pub log_freqs: Vec<f64>,
    /// p^{-1/2} for primes, or sqrt(cell mass) for surrogate nodes.
    pub weights: Vec<f64>,
    /// sigma_m^2 = (1/2) sum weights^2, compensated, fixed order.
    pub variance: f64,
}

impl Band {
    pub fn len(&self) -> usize {
        self.log_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_freqs.is_empty()
    }
}

/// Frequency lattice metadata carried by surrogate tables so the
/// spectral sampler can align nodes with FFT bins.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectralLattice {
    pub delta_u: f64,
    pub fft_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandTable {
    pub t: u32,
    pub mode: SamplingMode,
    /// Sieve limit floor(e^{e^t}) for exact tables, 0 for surrogate.
    pub sieve_limit: u64,
    pub bands: Vec<Band>,
    pub lattice: Option<SpectralLattice>,
}

impl BandTable {
    pub fn band(&self, m: u32) -> &Band {
        &self.bands[(m - 1) as usize]
    }

    /// Total variance V_t = sum of band variances.
    pub fn total_variance(&self) -> f64 {
        self.bands.iter().map(|b| b.variance).sum()
    }

    /// FNV-1a checksum over the table contents (also stored in caches).
    pub fn checksum(&self) -> u64 {
        let mut p = Payload::new();
        p.put_u32(self.t);
        p.put_u32(match self.mode {
            SamplingMode::ExactPrime => 0,
            SamplingMode::Surrogate => 1,
        });
        p.put_u64(self.sieve_limit);
        for b in &self.bands {
            p.put_u32(b.index);
            p.put_f64_slice(&b.log_freqs);
            p.put_f64_slice(&b.weights);
            p.put_f64(b.variance);
        }
        p.checksum()
    }
}

/// Simple odd-only sieve for primes up to `limit` (inclusive). Used for
/// base primes and small tables.
pub fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n / 2 + 1]; // index i <-> odd 2i+1
    let mut primes = vec![2u64];
    let mut i = 1usize;
    while (2 * i + 1) * (2 * i + 1) <= n {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p) / 2;
            while j <= n / 2 {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    for (i, &c) in composite.iter().enumerate().skip(1) {
        if !c && 2 * i < n {
            primes.push((2 * i + 1) as u64);
        }
    }
    primes
}

/// Run `visit(p)` over every prime in `[lo, hi]`, ascending, using a
/// segmented sieve over odd numbers.
fn sieve_segment(base: &[u64], lo: u64, hi: u64, visit: &mut impl FnMut(u64)) {
    debug_assert!(lo % 2 == 1 && lo >= 3);
    let len = ((hi - lo) / 2 + 1) as usize;
    let mut composite = vec![false; len];
    for &p in base.iter().skip(1) {
        // skip p=2
        if p * p > hi {
            break;
        }
        let mut start = p * p;
        if start < lo {
            let k = lo.div_ceil(p);
            start = k * p;
            if start % 2 == 0 {
                start += p;
            }
        }
        let mut j = start;
        while j <= hi {
            composite[((j - lo) / 2) as usize] = true;
            j += 2 * p;
        }
    }
    for (i, &c) in composite.iter().enumerate() {
        if !c {
            visit(lo + 2 * i as u64);
        }
    }
}

const SEGMENT_SPAN: u64 = 1 << 22;

/// Sieve all primes with `log p <= e^t` and partition them into bands.
///
/// Prime 2 has `log 2 < 1 = e^0` and falls below band 1, so it is not
/// part of the model; bands cover primes in `(e, e^{e^t}]`.
pub fn sieve_bands(config: &ModelConfig) -> Result<BandTable> {
    if config.mode != SamplingMode::ExactPrime {
        return Err(Error::Config("sieve_bands requires exact-prime mode".into()));
    }
    if config.t > config.exact_mode_cap {
        return Err(Error::LimitExceeded { t: config.t, cap: config.exact_mode_cap });
    }
    let limit = config.sieve_limit()?;
    let t = config.t;
    let boundaries: Vec<f64> = (0..=t).map(|m| (m as f64).exp()).collect();

    let base = small_primes((limit as f64).sqrt() as u64 + 2);
    let n_segments = (limit - 3) / SEGMENT_SPAN + 1;

    // Per-segment, per-band (log p, p^{-1/2}) pairs, merged in segment
    // order afterwards so the table is identical for any thread count.
    let per_segment: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..n_segments)
        .into_par_iter()
        .map(|s| {
            let lo = 3 + s * SEGMENT_SPAN;
            let hi = (lo + SEGMENT_SPAN - 1).min(limit);
            let mut bands: Vec<(Vec<f64>, Vec<f64>)> =
                (0..t).map(|_| (Vec::new(), Vec::new())).collect();
            if lo <= hi {
                sieve_segment(&base, lo, hi, &mut |p| {
                    let lp = (p as f64).ln();
                    if lp <= boundaries[0] {
                        return; // below band 1
                    }
                    let m = boundaries.partition_point(|&b| b < lp);
                    // lp in (boundaries[m-1], boundaries[m]] => band m
                    if m >= 1 && m <= t as usize {
                        let (freqs, weights) = &mut bands[m - 1];
                        freqs.push(lp);
                        weights.push(1.0 / (p as f64).sqrt());
                    }
                });
            }
            bands
        })
        .collect();

    let mut bands = Vec::with_capacity(t as usize);
    for m in 1..=t {
        let mut log_freqs = Vec::new();
        let mut weights = Vec::new();
        for seg in &per_segment {
            let (f, w) = &seg[(m - 1) as usize];
            log_freqs.extend_from_slice(f);
            weights.extend_from_slice(w);
        }
        let variance = 0.5 * compensated_sum(weights.iter().map(|w| w * w));
        bands.push(Band { index: m, log_freqs, weights, variance });
    }

    Ok(BandTable { t, mode: SamplingMode::ExactPrime, sieve_limit: limit, bands, lattice: None })
}

/// Synthetic band table on the spectral-synthesis lattice.
///
/// The lattice spacing `delta_u = 2*pi/(fft_len * spacing)` makes node
/// frequencies land exactly on FFT bins; each node carries the exact
/// `(1/2) int du/u` mass of its cell clipped to the band, so every band
/// variance is 1/2 up to rounding. A node whose cell straddles a band
/// boundary keeps its lattice frequency (within half a cell of the
/// boundary) while its mass is split exactly.
pub fn surrogate_bands(config: &ModelConfig) -> Result<BandTable> {
    if config.mode != SamplingMode::Surrogate {
        return Err(Error::Config("surrogate_bands requires surrogate mode".into()));
    }
    let t = config.t;
    let s = config.spacing();
    let n = config.grid_len();
    let span = (n - 1) as f64 * s;
    let min_len = ((span + LATTICE_MARGIN_H) / s).ceil() as usize;
    let fft_len = min_len.next_power_of_two();
    let delta_u = 2.0 * std::f64::consts::PI / (fft_len as f64 * s);

    let mut bands = Vec::with_capacity(t as usize);
    for m in 1..=t {
        let lo = ((m - 1) as f64).exp();
        let hi = (m as f64).exp();
        let mut log_freqs = Vec::new();
        let mut weights = Vec::new();
        let j_min = ((lo / delta_u) - 0.5).floor().max(1.0) as usize;
        let j_max = ((hi / delta_u) + 0.5).ceil() as usize;
        for j in j_min..=j_max {
            let u = j as f64 * delta_u;
            let cell_lo = ((j as f64 - 0.5) * delta_u).max(lo);
            let cell_hi = ((j as f64 + 0.5) * delta_u).min(hi);
            if cell_hi <= cell_lo {
                continue;
            }
            let mass = (cell_hi / cell_lo).ln();
            log_freqs.push(u);
            weights.push(mass.sqrt());
        }
        let variance = 0.5 * compensated_sum(weights.iter().map(|w| w * w));
        bands.push(Band { index: m, log_freqs, weights, variance });
    }

    Ok(BandTable {
        t,
        mode: SamplingMode::Surrogate,
        sieve_limit: 0,
        bands,
        lattice: Some(SpectralLattice { delta_u, fft_len }),
    })
}

/// Build the band table appropriate for the config's sampling mode.
pub fn build_bands(config: &ModelConfig) -> Result<BandTable> {
    match config.mode {
        SamplingMode::ExactPrime => sieve_bands(config),
        SamplingMode::Surrogate => surrogate_bands(config),
    }
}

/// `sum_{p <= x} 1/p - log log x`, the Mertens residual. Stabilizes to
/// Mertens' constant as x grows; the model never pins the constant, so
/// it is exposed as a measurement.
pub fn mertens_residual(x: f64) -> Result<f64> {
    Ok(mertens_residuals(&[x])?[0])
}

/// Residuals at several checkpoints with a single sieve pass up to the
/// largest one.
pub fn mertens_residuals(xs: &[f64]) -> Result<Vec<f64>> {
    for &x in xs {
        if !(x >= 3.0) {
            return Err(Error::Domain(format!("mertens residual needs x >= 3, got {x}")));
        }
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let max_x = xs[*order.last().unwrap()].floor() as u64;

    // Parallel partial sums of 1/p per segment, folded in order.
    let base = small_primes((max_x as f64).sqrt() as u64 + 2);
    let n_segments = if max_x >= 3 { (max_x - 3) / SEGMENT_SPAN + 1 } else { 0 };
    let partials: Vec<Vec<(u64, f64)>> = (0..n_segments)
        .into_par_iter()
        .map(|seg| {
            let lo = 3 + seg * SEGMENT_SPAN;
            let hi = (lo + SEGMENT_SPAN - 1).min(max_x);
            let mut recip = Vec::new();
            if lo <= hi {
                sieve_segment(&base, lo, hi, &mut |p| recip.push((p, 1.0 / p as f64)));
            }
            recip
        })
        .collect();

    let mut results = vec![0.0; xs.len()];
    let mut sum = 0.5f64; // p = 2
    let mut comp = 0.0f64;
    let mut next = 0usize;
    for seg in &partials {
        for &(p, r) in seg {
            while next < order.len() && xs[order[next]] < p as f64 {
                results[order[next]] = (sum + comp) - xs[order[next]].ln().ln();
                next += 1;
            }
            let t = sum + r;
            comp += if sum.abs() >= r { (sum - t) + r } else { (r - t) + sum };
            sum = t;
        }
    }
    while next < order.len() {
        results[order[next]] = (sum + comp) - xs[order[next]].ln().ln();
        next += 1;
    }
    Ok(results)
}

pub fn write_band_cache(path: &std::path::Path, table: &BandTable) -> Result<u64> {
    let mut p = Payload::new();
    p.put_u32(table.t);
    p.put_u32(match table.mode {
        SamplingMode::ExactPrime => 0,
        SamplingMode::Surrogate => 1,
    });
    p.put_u64(table.sieve_limit);
    match table.lattice {
        Some(lat) => {
            p.put_u32(1);
            p.put_f64(lat.delta_u);
            p.put_u64(lat.fft_len as u64);
        }
        None => p.put_u32(0),
    }
    p.put_u32(table.bands.len() as u32);
    for b in &table.bands {
        p.put_u32(b.index);
        p.put_f64_slice(&b.log_freqs);
        p.put_f64_slice(&b.weights);
        p.put_f64(b.variance);
    }
    p.write_to(path, BAND_CACHE_MAGIC, BAND_CACHE_VERSION)
}

pub fn read_band_cache(path: &std::path::Path) -> Result<BandTable> {
    let mut r = Reader::open(path, BAND_CACHE_MAGIC, BAND_CACHE_VERSION)?;
    let t = r.get_u32()?;
    let mode = match r.get_u32()? {
        0 => SamplingMode::ExactPrime,
        1 => SamplingMode::Surrogate,
        other => return Err(Error::Cache(format!("unknown mode tag {other}"))),
    };
    let sieve_limit = r.get_u64()?;
    let lattice = match r.get_u32()? {
        0 => None,
        1 => Some(SpectralLattice { delta_u: r.get_f64()?, fft_len: r.get_u64()? as usize }),
        other => return Err(Error::Cache(format!("unknown lattice tag {other}"))),
    };
    let n_bands = r.get_u32()?;
    let mut bands = Vec::with_capacity(n_bands as usize);
    for _ in 0..n_bands {
        let index = r.get_u32()?;
        let log_freqs = r.get_f64_vec()?;
        let weights = r.get_f64_vec()?;
        let variance = r.get_f64()?;
        bands.push(Band { index, log_freqs, weights, variance });
    }
    Ok(BandTable { t, mode, sieve_limit, bands, lattice })
}
