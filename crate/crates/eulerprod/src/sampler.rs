//! Drawing field realizations on the grid.
//!
//! Three interchangeable samplers produce the same finite-dimensional
//! Gaussian law for a given band table:
//!
//! * `Direct` evaluates the cosine sum over the table's nodes with one
//!   complex Gaussian per node, the ground-truth oracle, O(nodes * n)
//!   per sample;
//! * `Toeplitz` applies per-band Cholesky factors of the stationary
//!   covariance, O(n^2) per sample, the exact-mode default;
//! * `Spectral` synthesizes surrogate tables through an inverse FFT
//!   (surrogate nodes sit on the FFT frequency lattice by construction),
//!   O(N log N) per sample, the surrogate default, and the only path
//!   that scales to the ~1e5-point grids of large t.
//!
//! Every sample is a pure function of (master seed, sample index); the
//! parallel drivers produce identical output for any thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::config::ModelConfig;
use crate::covariance::ToeplitzCovariance;
use crate::error::{Error, Result};
use crate::primes::BandTable;
use crate::stats::stream;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Grid points {j*spacing : |j*spacing| <= half_width}, ascending,
/// symmetric, odd count, 0 in the middle.
pub fn grid(config: &ModelConfig) -> Vec<f64> {
    let s = config.spacing();
    let half = (config.half_width() / s).floor() as i64;
    (-half..=half).map(|j| j as f64 * s).collect()
}

/// One realization: per-band increments Y_m on the grid, m = 1..=t.
#[derive(Debug, Clone)]
pub struct FieldSample {
    /// (master seed, sample index): the full path to this realization's
    /// random stream.
    pub seed_path: (u64, u64),
    /// increments[m-1][g] = Y_m at grid point g.
    pub increments: Vec<Vec<f64>>,
}

impl FieldSample {
    pub fn t(&self) -> u32 {
        self.increments.len() as u32
    }

    pub fn grid_len(&self) -> usize {
        self.increments[0].len()
    }

    /// S_j(h) = sum_{m<=j} Y_m(h) pointwise.
    pub fn partial(&self, j: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.grid_len()];
        for band in &self.increments[..j as usize] {
            for (o, y) in out.iter_mut().zip(band) {
                *o += y;
            }
        }
        out
    }

    /// All partial sums S_1..S_t as prefix sums over bands.
    pub fn partials_all(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.increments.len());
        let mut acc = vec![0.0; self.grid_len()];
        for band in &self.increments {
            for (a, y) in acc.iter_mut().zip(band) {
                *a += y;
            }
            out.push(acc.clone());
        }
        out
    }

    /// The full field S_t.
    pub fn total(&self) -> Vec<f64> {
        self.partial(self.t())
    }

    /// max_h S_j(h) for j = 1..=t.
    pub fn scale_maxima(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid_len()];
        let mut out = Vec::with_capacity(self.increments.len());
        for band in &self.increments {
            for (a, y) in acc.iter_mut().zip(band) {
                *a += y;
            }
            out.push(acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        out
    }
}

/// Cosine-sum synthesis over explicit nodes with injectable draws (the
/// zero-draw hook makes Y_m vanish identically, used in tests).
fn synth_direct(
    bands: &BandTable,
    grid: &[f64],
    draw: &mut dyn FnMut() -> (f64, f64),
) -> Vec<Vec<f64>> {
    let n = grid.len();
    let step = if n > 1 { grid[1] - grid[0] } else { 0.0 };
    let mut increments = Vec::with_capacity(bands.bands.len());
    for band in &bands.bands {
        let mut row = vec![0.0f64; n];
        for (&u, &w) in band.log_freqs.iter().zip(&band.weights) {
            let (z1, z2) = draw();
            let a = w * FRAC_1_SQRT_2 * z1;
            let b = w * FRAC_1_SQRT_2 * z2;
            if a == 0.0 && b == 0.0 {
                continue;
            }
            // Rotate e^{iu*spacing} incrementally across the equispaced
            // grid instead of calling cos/sin per point.
            let (sin_step, cos_step) = (u * step).sin_cos();
            let (mut sin_h, mut cos_h) = (u * grid[0]).sin_cos();
            for slot in row.iter_mut() {
                *slot += a * cos_h + b * sin_h;
                let c = cos_h * cos_step - sin_h * sin_step;
                sin_h = sin_h * cos_step + cos_h * sin_step;
                cos_h = c;
            }
        }
        increments.push(row);
    }
    increments
}

/// Draw one realization from the prime (or node) sum: per node,
/// G = X + iY with X, Y independent N(0, 1/2), and
/// Y_m(h) = sum w (X cos(u h) + Y sin(u h)).
pub fn sample_direct(bands: &BandTable, config: &ModelConfig, sample_index: u64) -> FieldSample {
    sample_direct_on(bands, &grid(config), config.seed, sample_index)
}

/// `sample_direct` on an explicit grid (experiments refine subgrids).
pub fn sample_direct_on(
    bands: &BandTable,
    grid: &[f64],
    seed: u64,
    sample_index: u64,
) -> FieldSample {
    let mut rng = stream(seed, "sample", sample_index);
    let mut draw = || {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (z1, z2)
    };
    FieldSample { seed_path: (seed, sample_index), increments: synth_direct(bands, grid, &mut draw) }
}

/// Draw one realization from per-band Toeplitz factors: each band's
/// increment vector is L_m z with z standard normal, independent across
/// bands, identical in law to `sample_direct` on the same table.
pub fn sample_toeplitz(
    covs: &[ToeplitzCovariance],
    seed: u64,
    sample_index: u64,
) -> Result<FieldSample> {
    if covs.is_empty() {
        return Err(Error::FactorizationMissing { m: 1 });
    }
    for (i, c) in covs.iter().enumerate() {
        if c.k != c.l || c.k != i as u32 + 1 {
            return Err(Error::FactorizationMissing { m: i as u32 + 1 });
        }
    }
    let n = covs[0].n();
    let mut rng = stream(seed, "sample", sample_index);
    let mut z = vec![0.0f64; n];
    let mut increments = Vec::with_capacity(covs.len());
    for cov in covs {
        for slot in z.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        let mut out = vec![0.0f64; n];
        cov.factor.multiply(&z, &mut out);
        increments.push(out);
    }
    Ok(FieldSample { seed_path: (seed, sample_index), increments })
}

struct SpectralBand {
    bins: Vec<u32>,
    /// w / sqrt(2) per node.
    amp: Vec<f64>,
    /// e^{i u h_start} per node.
    twiddle: Vec<(f64, f64)>,
}

/// FFT synthesis of surrogate tables. Two independent realizations are
/// packed into one complex transform (real part / imaginary part), so a
/// sample pair costs one FFT; the pairing is fixed by sample index and
/// affects neither the law nor determinism.
pub struct SpectralSampler {
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    grid_len: usize,
    bands: Vec<SpectralBand>,
}

impl SpectralSampler {
    pub fn new(bands: &BandTable, config: &ModelConfig) -> Result<Self> {
        let lattice = bands.lattice.ok_or_else(|| {
            Error::Config("spectral sampling needs a surrogate table with lattice metadata".into())
        })?;
        let grid_len = config.grid_len();
        if grid_len > lattice.fft_len {
            return Err(Error::Config("fft length smaller than grid".into()));
        }
        let s = config.spacing();
        let h_start = -((config.half_width() / s).floor()) * s;
        let mut spec_bands = Vec::with_capacity(bands.bands.len());
        for band in &bands.bands {
            let mut bins = Vec::with_capacity(band.len());
            let mut amp = Vec::with_capacity(band.len());
            let mut twiddle = Vec::with_capacity(band.len());
            for (&u, &w) in band.log_freqs.iter().zip(&band.weights) {
                let j = (u / lattice.delta_u).round() as u32;
                if j == 0 || (j as usize) >= lattice.fft_len / 2 {
                    return Err(Error::Config(format!("node frequency {u} off the lattice")));
                }
                bins.push(j);
                amp.push(w * FRAC_1_SQRT_2);
                let (sin, cos) = (u * h_start).sin_cos();
                twiddle.push((cos, sin));
            }
            spec_bands.push(SpectralBand { bins, amp, twiddle });
        }
        let fft = FftPlanner::new().plan_fft_inverse(lattice.fft_len);
        Ok(SpectralSampler { fft, fft_len: lattice.fft_len, grid_len, bands: spec_bands })
    }

    fn scratch(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            vec![Complex64::new(0.0, 0.0); self.fft_len],
            vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        )
    }

    /// Fill the packed spectrum for one band and a pair of realizations.
    ///
    /// For Hermitian coefficient sets c_A, c_B the combined input
    /// d = Herm(c_A) + i Herm(c_B) transforms to y_A + i y_B with both
    /// outputs real, so Re/Im of the inverse FFT are the two samples.
    fn fill_band(
        &self,
        band: &SpectralBand,
        buf: &mut [Complex64],
        rng_a: &mut impl RngExt,
        rng_b: &mut impl RngExt,
    ) {
        let n = self.fft_len;
        for ((&j, &a), &(tc, ts)) in band.bins.iter().zip(&band.amp).zip(&band.twiddle) {
            let j = j as usize;
            // c = a (x - i y) e^{i u h_start}, independently per stream.
            let xa: f64 = rng_a.sample(StandardNormal);
            let ya: f64 = rng_a.sample(StandardNormal);
            let xb: f64 = rng_b.sample(StandardNormal);
            let yb: f64 = rng_b.sample(StandardNormal);
            let half_a = 0.5 * Complex64::new(a * (xa * tc + ya * ts), a * (xa * ts - ya * tc));
            let half_b = 0.5 * Complex64::new(a * (xb * tc + yb * ts), a * (xb * ts - yb * tc));
            buf[j] += Complex64::new(half_a.re - half_b.im, half_a.im + half_b.re);
            let conj_a = half_a.conj();
            let conj_b = half_b.conj();
            buf[n - j] += Complex64::new(conj_a.re - conj_b.im, conj_a.im + conj_b.re);
        }
    }

    fn transform(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fft.process_with_scratch(buf, scratch);
    }

    /// Per-band increments for the fixed pair (first, first+1).
    fn sample_pair(&self, seed: u64, first: u64) -> (FieldSample, FieldSample) {
        let (mut buf, mut scratch) = self.scratch();
        let mut inc_a = Vec::with_capacity(self.bands.len());
        let mut inc_b = Vec::with_capacity(self.bands.len());
        for (m, band) in self.bands.iter().enumerate() {
            // Fresh per-(sample, band) streams keep draws independent of
            // band processing order.
            let mut rng_a = stream(seed, "sample-band", first * 64 + m as u64);
            let mut rng_b = stream(seed, "sample-band", (first + 1) * 64 + m as u64);
            buf.fill(Complex64::new(0.0, 0.0));
            self.fill_band(band, &mut buf, &mut rng_a, &mut rng_b);
            self.transform(&mut buf, &mut scratch);
            inc_a.push(buf[..self.grid_len].iter().map(|c| c.re).collect::<Vec<f64>>());
            inc_b.push(buf[..self.grid_len].iter().map(|c| c.im).collect::<Vec<f64>>());
        }
        (
            FieldSample { seed_path: (seed, first), increments: inc_a },
            FieldSample { seed_path: (seed, first + 1), increments: inc_b },
        )
    }

    /// Total-field values for a pair, one FFT for both samples: band
    /// spectra occupy disjoint ranges (boundary bins may repeat, and
    /// independent draws at the same bin add in law), so summing the
    /// filled spectra before the transform equals summing increments.
    fn total_pair(&self, seed: u64, first: u64, out: &mut [f64]) {
        let (mut buf, mut scratch) = self.scratch();
        for (m, band) in self.bands.iter().enumerate() {
            let mut rng_a = stream(seed, "sample-band", first * 64 + m as u64);
            let mut rng_b = stream(seed, "sample-band", (first + 1) * 64 + m as u64);
            self.fill_band(band, &mut buf, &mut rng_a, &mut rng_b);
        }
        self.transform(&mut buf, &mut scratch);
        debug_assert_eq!(out.len(), 2 * self.grid_len);
        for (g, c) in buf[..self.grid_len].iter().enumerate() {
            out[g] = c.re;
            out[self.grid_len + g] = c.im;
        }
    }
}

/// Sampler facade used by experiments; cheap to clone, safe to share.
#[derive(Clone)]
pub enum SampleEngine {
    Direct { bands: Arc<BandTable> },
    Toeplitz { covs: Arc<Vec<ToeplitzCovariance>> },
    Spectral { synth: Arc<SpectralSampler> },
}

impl SampleEngine {
    pub fn direct(bands: Arc<BandTable>) -> Self {
        SampleEngine::Direct { bands }
    }

    pub fn toeplitz(covs: Arc<Vec<ToeplitzCovariance>>) -> Self {
        SampleEngine::Toeplitz { covs }
    }

    pub fn spectral(bands: &BandTable, config: &ModelConfig) -> Result<Self> {
        Ok(SampleEngine::Spectral { synth: Arc::new(SpectralSampler::new(bands, config)?) })
    }

    pub fn label(&self) -> &'static str {
        match self {
            SampleEngine::Direct { .. } => "direct",
            SampleEngine::Toeplitz { .. } => "toeplitz",
            SampleEngine::Spectral { .. } => "spectral",
        }
    }

    pub fn sample_field(&self, config: &ModelConfig, index: u64) -> Result<FieldSample> {
        match self {
            SampleEngine::Direct { bands } => Ok(sample_direct(bands, config, index)),
            SampleEngine::Toeplitz { covs } => sample_toeplitz(covs, config.seed, index),
            SampleEngine::Spectral { synth } => {
                let first = index - index % 2;
                let (a, b) = synth.sample_pair(config.seed, first);
                Ok(if index % 2 == 0 { a } else { b })
            }
        }
    }

    /// Map `f` over n samples in parallel; the output vector is ordered
    /// by sample index and identical for any thread count.
    pub fn map_fields<R: Send>(
        &self,
        config: &ModelConfig,
        n: usize,
        f: &(impl Fn(u64, &FieldSample) -> R + Sync),
    ) -> Result<Vec<R>> {
        match self {
            SampleEngine::Spectral { synth } => {
                let pairs = n.div_ceil(2);
                let nested: Vec<Vec<R>> = (0..pairs as u64)
                    .into_par_iter()
                    .map(|p| {
                        let first = 2 * p;
                        let (a, b) = synth.sample_pair(config.seed, first);
                        let mut out = Vec::with_capacity(2);
                        out.push(f(first, &a));
                        if (first + 1) < n as u64 {
                            out.push(f(first + 1, &b));
                        }
                        out
                    })
                    .collect();
                Ok(nested.into_iter().flatten().collect())
            }
            _ => (0..n as u64)
                .into_par_iter()
                .map(|i| self.sample_field(config, i).map(|s| f(i, &s)))
                .collect(),
        }
    }

    /// max_h S_t(h) for each of n samples (fast path: the spectral
    /// engine synthesizes only the total field, one FFT per pair).
    pub fn map_total_max(&self, config: &ModelConfig, n: usize) -> Result<Vec<f64>> {
        match self {
            SampleEngine::Spectral { synth } => {
                let pairs = n.div_ceil(2);
                let nested: Vec<Vec<f64>> = (0..pairs as u64)
                    .into_par_iter()
                    .map(|p| {
                        let first = 2 * p;
                        let mut out = vec![0.0; 2 * synth.grid_len];
                        synth.total_pair(config.seed, first, &mut out);
                        let max_a = out[..synth.grid_len]
                            .iter()
                            .cloned()
                            .fold(f64::NEG_INFINITY, f64::max);
                        let max_b = out[synth.grid_len..]
                            .iter()
                            .cloned()
                            .fold(f64::NEG_INFINITY, f64::max);
                        if (first + 1) < n as u64 {
                            vec![max_a, max_b]
                        } else {
                            vec![max_a]
                        }
                    })
                    .collect();
                Ok(nested.into_iter().flatten().collect())
            }
            _ => self.map_fields(config, n, &|_, s: &FieldSample| {
                s.total().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SamplingMode;
    use crate::covariance::band_toeplitz_set;
    use crate::primes::{sieve_bands, surrogate_bands};
    use crate::stats::{mean, variance};

    fn exact_config(t: u32) -> ModelConfig {
        ModelConfig::new(t, 0.5, SamplingMode::ExactPrime).unwrap()
    }

    #[test]
    fn grid_shape() {
        let cfg = exact_config(3);
        let g = grid(&cfg);
        assert_eq!(g.len(), 227);
        assert_eq!(g.len(), cfg.grid_len());
        assert_eq!(g[113], 0.0);
        let last = *g.last().unwrap();
        assert!(last <= cfg.half_width() && last + cfg.spacing() > cfg.half_width());
        for w in g.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert_eq!(g[0], -last);
    }

    #[test]
    fn zero_draws_give_zero_field() {
        let cfg = exact_config(1);
        let table = sieve_bands(&cfg).unwrap();
        let g = grid(&cfg);
        let inc = synth_direct(&table, &g, &mut || (0.0, 0.0));
        assert!(inc.iter().all(|row| row.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn direct_sampling_determinism() {
        let cfg = exact_config(1).with_seed(11);
        let table = sieve_bands(&cfg).unwrap();
        let a = sample_direct(&table, &cfg, 5);
        let b = sample_direct(&table, &cfg, 5);
        assert_eq!(a.increments, b.increments);
        let c = sample_direct(&table, &cfg, 6);
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn direct_variance_at_zero() {
        // Var Y_1(0) = sigma_1^2 = 0.4220113 within 3 standard errors.
        let cfg = exact_config(1).with_seed(3);
        let table = sieve_bands(&cfg).unwrap();
        let n = 100_000;
        let mid = cfg.grid_len() / 2;
        let vals: Vec<f64> =
            (0..n).map(|i| sample_direct(&table, &cfg, i as u64).increments[0][mid]).collect();
        let v = variance(&vals);
        let se = 0.4220113 * (2.0 / n as f64).sqrt();
        assert!((v - 0.4220113).abs() < 3.0 * se, "var {v}");
        let m = mean(&vals);
        assert!(m.abs() < 3.0 * (0.4220113f64 / n as f64).sqrt());
    }

    #[test]
    fn partials_are_consistent() {
        let cfg = exact_config(2).with_seed(1);
        let table = sieve_bands(&cfg).unwrap();
        let s = sample_direct(&table, &cfg, 0);
        let p1 = s.partial(1);
        let p2 = s.partial(2);
        for g in 0..s.grid_len() {
            let tail: f64 = s.increments[1][g];
            assert!((p2[g] - p1[g] - tail).abs() < 1e-12);
        }
        let all = s.partials_all();
        assert_eq!(all[1], s.total());
        let maxima = s.scale_maxima();
        for (j, m) in maxima.iter().enumerate() {
            let direct = all[j].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(*m, direct);
        }
    }

    #[test]
    fn toeplitz_determinism_and_shape() {
        let cfg = exact_config(2).with_seed(9);
        let table = sieve_bands(&cfg).unwrap();
        let covs = Arc::new(band_toeplitz_set(&table, &cfg).unwrap());
        let a = sample_toeplitz(&covs, cfg.seed, 3).unwrap();
        let b = sample_toeplitz(&covs, cfg.seed, 3).unwrap();
        assert_eq!(a.increments, b.increments);
        assert_eq!(a.t(), 2);
        assert_eq!(a.grid_len(), cfg.grid_len());
    }

    #[test]
    fn toeplitz_empirical_covariance_matches_rows() {
        // t=2 smoke test: empirical covariance of S_t at each lag within
        // 3 standard errors of the stored Toeplitz row (Isserlis se for
        // a single pair; positional averaging does not shrink it much).
        let cfg = exact_config(2).with_seed(20);
        let table = sieve_bands(&cfg).unwrap();
        let covs = Arc::new(band_toeplitz_set(&table, &cfg).unwrap());
        let n_samp = 10_000usize;
        let n = cfg.grid_len();
        let totals: Vec<Vec<f64>> = (0..n_samp)
            .map(|i| sample_toeplitz(&covs, cfg.seed, i as u64).unwrap().total())
            .collect();
        let row: Vec<f64> =
            (0..n).map(|lag| covs.iter().map(|c| c.values[lag]).sum::<f64>()).collect();
        let v0 = row[0];
        for lag in 0..n {
            let mut acc = 0.0;
            let mut count = 0.0;
            for tot in &totals {
                for g in 0..n - lag {
                    acc += tot[g] * tot[g + lag];
                    count += 1.0;
                }
            }
            let emp = acc / count;
            let se = ((v0 * v0 + row[lag] * row[lag]) / n_samp as f64).sqrt();
            assert!(
                (emp - row[lag]).abs() < 3.0 * se,
                "lag {lag}: emp {emp} vs {} (se {se})",
                row[lag]
            );
        }
    }

    #[test]
    fn spectral_single_node_matches_cosine() {
        // Zero out all but one node and compare the FFT path against the
        // direct cosine formula at every grid point.
        let cfg = ModelConfig::new(4, 0.5, SamplingMode::Surrogate).unwrap().with_seed(5);
        let table = surrogate_bands(&cfg).unwrap();
        let synth = SpectralSampler::new(&table, &cfg).unwrap();
        let g = grid(&cfg);

        let band = 2usize;
        let node = 7usize;
        let (mut buf, mut scratch) = synth.scratch();
        let sb = &synth.bands[band];
        let (j, a, (tc, ts)) = (sb.bins[node] as usize, sb.amp[node], sb.twiddle[node]);
        let (xa, ya) = (0.8, -1.3);
        let ca = Complex64::new(a * (xa * tc + ya * ts), a * (xa * ts - ya * tc));
        buf[j] += 0.5 * ca;
        buf[synth.fft_len - j] += 0.5 * ca.conj();
        synth.transform(&mut buf, &mut scratch);

        let u = table.bands[band].log_freqs[node];
        for (gi, &h) in g.iter().enumerate() {
            let want = a * (xa * (u * h).cos() + ya * (u * h).sin());
            assert!(
                (buf[gi].re - want).abs() < 1e-9,
                "g={gi}: fft {} vs direct {want}",
                buf[gi].re
            );
            assert!(buf[gi].im.abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_pair_packing_is_consistent() {
        // Re/Im unpacking must agree with the engine's per-index access,
        // and the total fast path with the per-band path.
        let cfg = ModelConfig::new(4, 0.5, SamplingMode::Surrogate).unwrap().with_seed(13);
        let table = surrogate_bands(&cfg).unwrap();
        let engine = SampleEngine::spectral(&table, &cfg).unwrap();
        let s0 = engine.sample_field(&cfg, 0).unwrap();
        let s1 = engine.sample_field(&cfg, 1).unwrap();
        let via_map =
            engine.map_fields(&cfg, 2, &|_, s: &FieldSample| s.increments.clone()).unwrap();
        assert_eq!(via_map[0], s0.increments);
        assert_eq!(via_map[1], s1.increments);
        let maxima = engine.map_total_max(&cfg, 2).unwrap();
        let m0 = s0.total().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m1 = s1.total().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((maxima[0] - m0).abs() < 1e-9);
        assert!((maxima[1] - m1).abs() < 1e-9);
    }

    #[test]
    fn spectral_empirical_variance() {
        // Sample variance of S_t(0) over N draws within 3 se of the
        // table's total variance (one 1/2 per band for surrogate tables).
        let cfg = ModelConfig::new(4, 0.5, SamplingMode::Surrogate).unwrap().with_seed(77);
        let table = surrogate_bands(&cfg).unwrap();
        let engine = SampleEngine::spectral(&table, &cfg).unwrap();
        let n = 4000usize;
        let mid = cfg.grid_len() / 2;
        let vals = engine
            .map_fields(&cfg, n, &|_, s: &FieldSample| {
                s.increments.iter().map(|row| row[mid]).sum::<f64>()
            })
            .unwrap();
        let want = table.total_variance();
        let v = variance(&vals);
        let se = want * (2.0 / n as f64).sqrt();
        assert!((v - want).abs() < 3.0 * se, "var {v} want {want}");
    }

    #[test]
    fn engine_map_is_thread_invariant() {
        // Same results from a single-thread pool and the global pool.
        let cfg = exact_config(1).with_seed(2);
        let table = Arc::new(sieve_bands(&cfg).unwrap());
        let engine = SampleEngine::direct(table);
        let out1 =
            engine.map_fields(&cfg, 17, &|i, s: &FieldSample| (i, s.increments[0][0])).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let out2 = pool.install(|| {
            engine.map_fields(&cfg, 17, &|i, s: &FieldSample| (i, s.increments[0][0])).unwrap()
        });
        assert_eq!(out1, out2);
    }
}
