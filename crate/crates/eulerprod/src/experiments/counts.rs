//! Exceedance counts and their second-moment (Paley-Zygmund) bound, and
//! the pair-correlation curve over branching times.
//!
//! The per-point event is J(h) = { S_t(h) in [mu t + y, mu t + y + delta],
//! S_k(h) < M(k) for all integer k <= t } with the lower barrier; for
//! y < 0 the caller passes the barrier without the y offset and the count
//! plays the role of W_delta.

use serde::{Deserialize, Serialize};

use super::{RunStamp, Simulator};
use crate::error::{Error, Result};
use crate::predict::{BarrierKind, BarrierSpec};
use crate::sampler::FieldSample;
use crate::stats::{mean, stream};
use rand::RngExt;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountReport {
    pub stamp: RunStamp,
    pub delta: f64,
    pub y: f64,
    /// True when y < 0 and the barrier carries no y offset (W_delta).
    pub is_w_variant: bool,
    /// Per-sample exceedance counts.
    pub counts: Vec<u32>,
    pub mean_z: f64,
    pub mean_z2: f64,
    /// Paley-Zygmund lower bound mean_z^2 / mean_z2.
    pub pz_lower: f64,
    pub pz_stderr: f64,
    /// Fraction of samples with at least one exceedance.
    pub p_ge_1: f64,
    pub p_ge_1_stderr: f64,
}

impl CountReport {
    pub fn csv_header() -> &'static str {
        "sample_id,count"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.counts.iter().enumerate().map(|(i, c)| format!("{i},{c}")).collect()
    }

    /// The Paley-Zygmund inequality for the true law says
    /// pz_lower <= P(Z >= 1); the sample version must hold up to
    /// statistical slack.
    pub fn pz_slack(&self) -> f64 {
        (self.pz_stderr.powi(2) + self.p_ge_1_stderr.powi(2)).sqrt()
    }
}

/// Count grid points satisfying J(h) per sample and aggregate the
/// Paley-Zygmund quantities.
pub fn count_exceedances(
    sim: &Simulator,
    delta: f64,
    y: f64,
    barrier: &BarrierSpec,
    n: usize,
) -> Result<CountReport> {
    if delta <= 0.0 {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if barrier.kind == BarrierKind::Upper {
        return Err(Error::Domain("exceedance counts use the lower/good-event barrier".into()));
    }
    if barrier.t != sim.config.t || barrier.alpha != sim.config.alpha {
        return Err(Error::Domain("barrier scales do not match the simulator config".into()));
    }
    let t = sim.config.t;
    let mu = barrier.mu;
    let lo = mu * t as f64 + y;
    let hi = lo + delta;
    let levels: Vec<f64> = (1..=t).map(|k| barrier.value(k)).collect::<Result<_>>()?;

    let counts: Vec<u32> = sim.engine.map_fields(&sim.config, n, &|_, s: &FieldSample| {
        count_in_sample(s, lo, hi, &levels)
    })?;

    let zf: Vec<f64> = counts.iter().map(|&z| z as f64).collect();
    let z2: Vec<f64> = counts.iter().map(|&z| (z as f64) * (z as f64)).collect();
    let mean_z = mean(&zf);
    let mean_z2 = mean(&z2);
    let pz_lower = if mean_z2 > 0.0 { mean_z * mean_z / mean_z2 } else { 0.0 };

    // Bootstrap stderr of the plug-in ratio.
    let pz_stderr = {
        let mut rng = stream(sim.config.seed, "pz-bootstrap", 0);
        let resamples = 400;
        let mut vals = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            let mut s1 = 0.0f64;
            let mut s2 = 0.0f64;
            for _ in 0..counts.len() {
                let z = counts[rng.random_range(0..counts.len())] as f64;
                s1 += z;
                s2 += z * z;
            }
            if s2 > 0.0 {
                vals.push((s1 / counts.len() as f64).powi(2) / (s2 / counts.len() as f64));
            }
        }
        if vals.len() > 1 {
            crate::stats::variance(&vals).sqrt()
        } else {
            0.0
        }
    };

    let hits = counts.iter().filter(|&&z| z >= 1).count() as u64;
    let p_ge_1 = hits as f64 / n as f64;
    let p_ge_1_stderr = (p_ge_1 * (1.0 - p_ge_1) / n as f64).sqrt();

    Ok(CountReport {
        stamp: RunStamp::new(&sim.config, n, &sim.engine),
        delta,
        y,
        is_w_variant: y < 0.0,
        counts,
        mean_z,
        mean_z2,
        pz_lower,
        pz_stderr,
        p_ge_1,
        p_ge_1_stderr,
    })
}

fn count_in_sample(s: &FieldSample, lo: f64, hi: f64, levels: &[f64]) -> u32 {
    let flags = event_flags(s, lo, hi, levels);
    flags.iter().filter(|&&b| b).count() as u32
}

/// J(h) indicator per grid point.
fn event_flags(s: &FieldSample, lo: f64, hi: f64, levels: &[f64]) -> Vec<bool> {
    let n = s.grid_len();
    let mut ok = vec![true; n];
    let mut acc = vec![0.0f64; n];
    for (j, band) in s.increments.iter().enumerate() {
        let last = j + 1 == s.increments.len();
        for g in 0..n {
            acc[g] += band[g];
            if acc[g] >= levels[j] {
                ok[g] = false;
            }
            if last && ok[g] {
                ok[g] = acc[g] >= lo && acc[g] <= hi;
            }
        }
    }
    ok
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairBin {
    /// Branching-time bin: k_b = floor(log 1/|dh|).
    pub k_b: i32,
    /// Number of (anchor, offset) grid pairs pooled per sample.
    pub pairs_per_sample: u64,
    /// P(J(h) and J(h')) over pairs at this branching time.
    pub joint: f64,
    pub joint_se: f64,
    /// Product of marginals (decoupled prediction).
    pub product: f64,
    /// joint / product; > 1 means coupling.
    pub ratio: f64,
    pub sparse: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCorrReport {
    pub stamp: RunStamp,
    pub y: f64,
    pub delta: f64,
    pub marginal: f64,
    pub bins: Vec<PairBin>,
}

impl PairCorrReport {
    pub fn csv_header() -> &'static str {
        "k_b,pairs_per_sample,joint,joint_se,product,ratio,sparse"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.bins
            .iter()
            .map(|b| {
                format!(
                    "{},{},{},{},{},{},{}",
                    b.k_b, b.pairs_per_sample, b.joint, b.joint_se, b.product, b.ratio, b.sparse
                )
            })
            .collect()
    }
}

/// Empirical decoupling curve: P(J(h) and J(h+dh)) binned by the branching
/// time k_b = log|dh|^{-1}, pooled over anchor positions (stationarity).
pub fn pair_correlation(
    sim: &Simulator,
    y: f64,
    delta: f64,
    barrier: &BarrierSpec,
    n: usize,
) -> Result<PairCorrReport> {
    if n < 10_000 {
        return Err(Error::Domain(format!("pair correlation needs n >= 1e4, got {n}")));
    }
    if barrier.kind == BarrierKind::Upper {
        return Err(Error::Domain("pair correlation uses the lower barrier".into()));
    }
    let t = sim.config.t;
    let s_grid = sim.config.spacing();
    let mu = barrier.mu;
    let lo = mu * t as f64 + y;
    let hi = lo + delta;
    let levels: Vec<f64> = (1..=t).map(|k| barrier.value(k)).collect::<Result<_>>()?;
    let n_grid = sim.config.grid_len();

    // Offset d -> branching-time bin floor(-ln(d*s)).
    let bin_of: Vec<i32> =
        (1..n_grid).map(|d| (-(d as f64 * s_grid).ln()).floor() as i32).collect();
    let min_bin = *bin_of.iter().min().unwrap();
    let max_bin = *bin_of.iter().max().unwrap();
    let n_bins = (max_bin - min_bin + 1) as usize;
    let pairs_per_bin: Vec<u64> = {
        let mut acc = vec![0u64; n_bins];
        for (d, &b) in bin_of.iter().enumerate() {
            acc[(b - min_bin) as usize] += (n_grid - (d + 1)) as u64;
        }
        acc
    };

    // Per sample: (per-bin joint counts, J-true point count).
    let per_sample: Vec<(Vec<u32>, u32)> =
        sim.engine.map_fields(&sim.config, n, &|_, s: &FieldSample| {
            let flags = event_flags(s, lo, hi, &levels);
            let mut joint = vec![0u32; n_bins];
            let truthy: Vec<usize> =
                flags.iter().enumerate().filter(|(_, &f)| f).map(|(g, _)| g).collect();
            for (i, &g) in truthy.iter().enumerate() {
                for &g2 in &truthy[i + 1..] {
                    let d = g2 - g;
                    joint[(bin_of[d - 1] - min_bin) as usize] += 1;
                }
            }
            (joint, truthy.len() as u32)
        })?;

    let marginal =
        per_sample.iter().map(|(_, c)| *c as f64).sum::<f64>() / (n as f64 * n_grid as f64);

    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let pairs = pairs_per_bin[b];
        if pairs == 0 {
            continue;
        }
        let per: Vec<f64> =
            per_sample.iter().map(|(j, _)| j[b] as f64 / pairs as f64).collect();
        let joint = mean(&per);
        let joint_se = (crate::stats::variance(&per) / n as f64).sqrt();
        let product = marginal * marginal;
        let hits: f64 = per_sample.iter().map(|(j, _)| j[b] as f64).sum();
        bins.push(PairBin {
            k_b: min_bin + b as i32,
            pairs_per_sample: pairs,
            joint,
            joint_se,
            product,
            ratio: if product > 0.0 { joint / product } else { f64::NAN },
            sparse: hits < 20.0,
        });
    }

    Ok(PairCorrReport {
        stamp: RunStamp::new(&sim.config, n, &sim.engine),
        y,
        delta,
        marginal,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModelConfig, SamplingMode};

    fn sim_t2(seed: u64) -> Simulator {
        let cfg = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime).unwrap().with_seed(seed);
        Simulator::build(&cfg).unwrap()
    }

    #[test]
    fn counts_window_above_max_is_zero() {
        let sim = sim_t2(31);
        let barrier = BarrierSpec::new(BarrierKind::Lower, 2, 0.5, 1e6).unwrap();
        // Window shifted far above any sample max: all counts zero.
        let report = count_exceedances(&sim, 1.0, 1e6, &barrier, 1000).unwrap();
        assert!(report.counts.iter().all(|&z| z == 0));
        assert_eq!(report.p_ge_1, 0.0);
        assert_eq!(report.pz_lower, 0.0);
    }

    #[test]
    fn counts_bounded_by_plain_exceedances() {
        // Z_delta <= #{h: S_t(h) > mu t + y} always: the window's upper
        // edge and the barrier only restrict the set.
        let sim = sim_t2(32);
        let y = 0.0;
        let barrier = BarrierSpec::new(BarrierKind::Lower, 2, 0.5, y).unwrap();
        let report = count_exceedances(&sim, 1.0, y, &barrier, 500).unwrap();
        let mu = barrier.mu;
        let plain: Vec<u32> = sim
            .engine
            .map_fields(&sim.config, 500, &|_, s: &FieldSample| {
                s.total().iter().filter(|&&v| v > mu * 2.0 + y).count() as u32
            })
            .unwrap();
        for (z, p) in report.counts.iter().zip(&plain) {
            assert!(z <= p);
        }
    }

    #[test]
    fn paley_zygmund_holds_with_slack() {
        let sim = sim_t2(33);
        let y = 0.0;
        let barrier = BarrierSpec::new(BarrierKind::Lower, 2, 0.5, y).unwrap();
        let report = count_exceedances(&sim, 1.0, y, &barrier, 20_000).unwrap();
        assert!(report.mean_z > 0.0, "window must see mass at t=2");
        assert!(
            report.pz_lower <= report.p_ge_1 + 3.0 * report.pz_slack(),
            "pz {} vs p>=1 {} (slack {})",
            report.pz_lower,
            report.p_ge_1,
            report.pz_slack()
        );
    }

    #[test]
    fn pair_correlation_shape() {
        let sim = sim_t2(34);
        let barrier = BarrierSpec::new(BarrierKind::Lower, 2, 0.5, 0.0).unwrap();
        let report = pair_correlation(&sim, 0.0, 1.0, &barrier, 10_000).unwrap();
        assert!(!report.bins.is_empty());
        assert!(report.marginal > 0.0);
        // Bins are labeled by increasing branching time; the most distant
        // offsets (smallest k_b) should sit near ratio 1 when not sparse.
        let far = &report.bins[0];
        if !far.sparse {
            assert!(far.ratio > 0.2 && far.ratio < 5.0, "far ratio {}", far.ratio);
        }
    }
}
