//! Critical moments: the normalized exponential integral Z_beta, the
//! all-scales good event E_A, the measure of high points S(V), and the
//! Markov-style tail curve of the normalized moment.

use serde::{Deserialize, Serialize};

use super::{RunStamp, Simulator};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::predict::{BarrierKind, BarrierSpec};
use crate::sampler::FieldSample;
use crate::stats::{log_sum_exp, quantile_sorted, wilson_interval};

/// Trapezoid weights over the grid, normalized by the interval length
/// 2*half_width (the grid spans slightly less; the defining integral is
/// over the full interval).
fn trapezoid_log_weights(config: &ModelConfig, n: usize) -> Vec<f64> {
    let s = config.spacing();
    let norm = (2.0 * config.half_width()).ln();
    (0..n)
        .map(|g| {
            let w = if g == 0 || g + 1 == n { 0.5 * s } else { s };
            w.ln() - norm
        })
        .collect()
}

/// log Z_beta = log( (1/(2 half_width)) int exp(beta S_t(h)) dh ),
/// trapezoidal rule in the log domain.
pub fn moment_integral(sample: &FieldSample, config: &ModelConfig, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("moment integral needs beta > 0, got {beta}")));
    }
    let total = sample.total();
    let logw = trapezoid_log_weights(config, total.len());
    let terms: Vec<f64> =
        total.iter().zip(&logw).map(|(&x, &lw)| beta * x + lw).collect();
    Ok(log_sum_exp(&terms))
}

/// E_A: every scale's grid max respects the good-event barrier M_A.
pub fn good_event_flag(sample: &FieldSample, a: f64, config: &ModelConfig) -> Result<bool> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("good event needs A > 0, got {a}")));
    }
    let barrier = BarrierSpec::new(BarrierKind::GoodEvent, config.t, config.alpha, a)?;
    let maxima = sample.scale_maxima();
    for (j, &m) in maxima.iter().enumerate() {
        if m > barrier.value(j as u32 + 1)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Discrete proxy for the measure of high points:
/// (1/(2 half_width)) * spacing * #{h : S_t(h) > V, barrier holds at h};
/// `barrier: None` disables the barrier constraint (test hook).
pub fn high_point_measure(
    sample: &FieldSample,
    v: f64,
    barrier: Option<&BarrierSpec>,
    config: &ModelConfig,
) -> Result<f64> {
    let ok = barrier_ok_flags(sample, barrier)?;
    let total = sample.total();
    let count =
        total.iter().zip(&ok).filter(|&(&x, &keep)| keep && x > v).count();
    // The cell sum can overhang the interval by a fraction of one cell;
    // the measure proxy stays in [0, 1].
    Ok((config.spacing() * count as f64 / (2.0 * config.half_width())).min(1.0))
}

/// Per-point indicator of S_k(h) <= M_A(k) for all k (vacuously true
/// without a barrier).
fn barrier_ok_flags(sample: &FieldSample, barrier: Option<&BarrierSpec>) -> Result<Vec<bool>> {
    let n = sample.grid_len();
    let mut ok = vec![true; n];
    if let Some(spec) = barrier {
        let levels: Vec<f64> =
            (1..=sample.t()).map(|k| spec.value(k)).collect::<Result<_>>()?;
        let mut acc = vec![0.0f64; n];
        for (j, band) in sample.increments.iter().enumerate() {
            for g in 0..n {
                acc[g] += band[g];
                if acc[g] > levels[j] {
                    ok[g] = false;
                }
            }
        }
    }
    Ok(ok)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub stamp: RunStamp,
    pub beta: f64,
    pub a_list: Vec<f64>,
    /// log Z normalization shift (beta^2/4) t - (alpha - 1/2) log t.
    pub norm_shift: f64,
    pub log_z_quantiles: Vec<(f64, f64)>,
    /// P(Z_norm > A) per A, with Wilson bounds.
    pub p_znorm: Vec<f64>,
    pub p_znorm_lo: Vec<f64>,
    pub p_znorm_hi: Vec<f64>,
    pub a_times_p: Vec<f64>,
    /// Empirical complement frequency of the good event per A.
    pub e_ac_hits: Vec<u64>,
    pub e_ac_freq: Vec<f64>,
    /// Largest per-sample relative error of the integration-by-parts
    /// identity (checked on a fixed subset of samples).
    pub ibp_max_rel_err: f64,
    pub n: usize,
}

impl MomentReport {
    pub fn csv_header() -> &'static str {
        "A,p_znorm_gt,p_lo,p_hi,a_times_p,e_ac_hits,e_ac_freq"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        (0..self.a_list.len())
            .map(|i| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.a_list[i],
                    self.p_znorm[i],
                    self.p_znorm_lo[i],
                    self.p_znorm_hi[i],
                    self.a_times_p[i],
                    self.e_ac_hits[i],
                    self.e_ac_freq[i]
                )
            })
            .collect()
    }
}

/// Number of leading samples on which the integration-by-parts identity
/// is evaluated numerically.
const IBP_SAMPLES: u64 = 8;

/// Tail curve of the normalized moment Z_beta / exp((beta^2/4) t -
/// (alpha-1/2) log t) against each A, plus good-event complement
/// frequencies and the per-sample integration-by-parts check.
pub fn moment_markov_curve(
    sim: &Simulator,
    beta: f64,
    a_list: &[f64],
    n: usize,
) -> Result<MomentReport> {
    if a_list.is_empty() || a_list.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("A list must be positive".into()));
    }
    let cfg = &sim.config;
    let tf = cfg.t as f64;
    let norm_shift = beta * beta / 4.0 * tf - (cfg.alpha - 0.5) * tf.ln();
    let a_ref = a_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let barrier_ref = BarrierSpec::new(BarrierKind::GoodEvent, cfg.t, cfg.alpha, a_ref)?;
    let good_levels: Vec<Vec<f64>> = a_list
        .iter()
        .map(|&a| {
            let b = BarrierSpec::new(BarrierKind::GoodEvent, cfg.t, cfg.alpha, a)?;
            (1..=cfg.t).map(|k| b.value(k)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    struct PerSample {
        log_z: f64,
        maxima: Vec<f64>,
        ibp_rel_err: Option<f64>,
    }

    let per: Vec<Result<PerSample>> = sim.engine.map_fields(cfg, n, &|i, s: &FieldSample| {
        let log_z = moment_integral(s, cfg, beta)?;
        let maxima = s.scale_maxima();
        let ibp_rel_err = if i < IBP_SAMPLES {
            ibp_identity_rel_err(s, cfg, beta, &barrier_ref)?
        } else {
            None
        };
        Ok(PerSample { log_z, maxima, ibp_rel_err })
    })?;
    let per: Vec<PerSample> = per.into_iter().collect::<Result<_>>()?;

    for p in &per {
        if !p.log_z.is_finite() {
            return Err(Error::Domain("non-finite log Z encountered".into()));
        }
    }

    let mut log_z: Vec<f64> = per.iter().map(|p| p.log_z).collect();
    let mut p_znorm = Vec::new();
    let mut p_lo = Vec::new();
    let mut p_hi = Vec::new();
    let mut a_times_p = Vec::new();
    let mut e_ac_hits = Vec::new();
    let mut e_ac_freq = Vec::new();
    for (ai, &a) in a_list.iter().enumerate() {
        let thresh = a.ln() + norm_shift;
        let hits = log_z.iter().filter(|&&lz| lz > thresh).count() as u64;
        let ci = wilson_interval(hits, n as u64, 0.95)?;
        p_znorm.push(ci.point);
        p_lo.push(ci.lo);
        p_hi.push(ci.hi);
        a_times_p.push(a * ci.point);
        let bad = per
            .iter()
            .filter(|p| {
                p.maxima.iter().zip(&good_levels[ai]).any(|(&m, &lvl)| m > lvl)
            })
            .count() as u64;
        e_ac_hits.push(bad);
        e_ac_freq.push(bad as f64 / n as f64);
    }

    log_z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let log_z_quantiles = [0.25, 0.5, 0.75, 0.9, 0.99]
        .iter()
        .map(|&q| (q, quantile_sorted(&log_z, q)))
        .collect();

    let ibp_max_rel_err = per
        .iter()
        .filter_map(|p| p.ibp_rel_err)
        .fold(0.0f64, f64::max);

    Ok(MomentReport {
        stamp: RunStamp::new(cfg, n, &sim.engine),
        beta,
        a_list: a_list.to_vec(),
        norm_shift,
        log_z_quantiles,
        p_znorm,
        p_znorm_lo: p_lo,
        p_znorm_hi: p_hi,
        a_times_p,
        e_ac_hits,
        e_ac_freq,
        ibp_max_rel_err,
        n,
    })
}

/// Integration by parts ties the barrier-filtered moment to the measure
/// of high points: sum_ok w e^{beta x} = e^{beta V0} S(V0)
/// + beta int_{V0}^{max} e^{beta V} S(V) dV, with S built from the same
/// weights. Both sides are evaluated numerically; returns the relative
/// gap, or None when no grid point survives the barrier.
fn ibp_identity_rel_err(
    sample: &FieldSample,
    config: &ModelConfig,
    beta: f64,
    barrier: &BarrierSpec,
) -> Result<Option<f64>> {
    let ok = barrier_ok_flags(sample, Some(barrier))?;
    let total = sample.total();
    let logw = trapezoid_log_weights(config, total.len());
    let mut pts: Vec<(f64, f64)> = total
        .iter()
        .zip(&logw)
        .zip(&ok)
        .filter(|&(_, &keep)| keep)
        .map(|((&x, &lw), _)| (x, lw.exp()))
        .collect();
    if pts.is_empty() {
        return Ok(None);
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let lhs: f64 = pts.iter().map(|&(x, w)| w * (beta * x).exp()).sum();

    let v0 = pts[0].0 - 0.5;
    let v_max = pts[pts.len() - 1].0;
    // S(V) = sum of weights of points strictly above V, via suffix sums.
    let mut suffix = vec![0.0f64; pts.len() + 1];
    for i in (0..pts.len()).rev() {
        suffix[i] = suffix[i + 1] + pts[i].1;
    }
    let measure_above = |v: f64| -> f64 {
        let idx = pts.partition_point(|&(x, _)| x <= v);
        suffix[idx]
    };
    let steps = 20_000usize;
    let dv = (v_max - v0) / steps as f64;
    let mut integral = 0.0;
    let mut prev = (beta * v0).exp() * measure_above(v0);
    for i in 1..=steps {
        let v = v0 + i as f64 * dv;
        let cur = (beta * v).exp() * measure_above(v);
        integral += 0.5 * (prev + cur) * dv;
        prev = cur;
    }
    let rhs = (beta * v0).exp() * measure_above(v0) + beta * integral;
    Ok(Some(((lhs - rhs) / lhs).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SamplingMode;
    use crate::predict::critical_beta;
    use crate::sampler::FieldSample;
    use crate::stats::{bootstrap_mean, mean};

    fn sim_t2(seed: u64) -> Simulator {
        let cfg = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime).unwrap().with_seed(seed);
        Simulator::build(&cfg).unwrap()
    }

    fn constant_sample(cfg: &ModelConfig, c: f64) -> FieldSample {
        let n = cfg.grid_len();
        let mut increments = vec![vec![0.0; n]; cfg.t as usize];
        increments[0] = vec![c; n];
        FieldSample { seed_path: (0, 0), increments }
    }

    #[test]
    fn constant_field_moment() {
        // S_t = c everywhere: log Z = beta c + log(grid span / interval).
        let cfg = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime).unwrap();
        let s = constant_sample(&cfg, 1.7);
        let beta = 2.0;
        let lz = moment_integral(&s, &cfg, beta).unwrap();
        let covered = (cfg.grid_len() - 1) as f64 * cfg.spacing();
        let want = beta * 1.7 + (covered / (2.0 * cfg.half_width())).ln();
        assert!((lz - want).abs() < 1e-12, "{lz} vs {want}");
        assert!(moment_integral(&s, &cfg, 0.0).is_err());
    }

    #[test]
    fn moment_bounds_by_max() {
        let sim = sim_t2(41);
        let cfg = &sim.config;
        let s = sim.engine.sample_field(cfg, 0).unwrap();
        let beta = critical_beta(cfg.t, cfg.alpha).unwrap();
        let lz = moment_integral(&s, cfg, beta).unwrap();
        let max = s.total().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lz <= beta * max + 1e-12);
        let floor = beta * max + (cfg.spacing() / (4.0 * cfg.half_width())).ln();
        assert!(lz >= floor - 1e-12, "lz {lz} floor {floor}");
    }

    #[test]
    fn moment_mgf_against_band_variance() {
        // Fubini + Gaussian MGF: E[Z_1] = (covered/2hw) e^{V_t/2} with V_t
        // the total band variance. Bootstrap CI check at modest n.
        let sim = sim_t2(42);
        let cfg = &sim.config;
        let table = crate::primes::sieve_bands(cfg).unwrap();
        let vt = table.total_variance();
        let n = 4000;
        let zs: Vec<f64> = sim
            .engine
            .map_fields(cfg, n, &|_, s: &FieldSample| {
                moment_integral(s, cfg, 1.0).unwrap().exp()
            })
            .unwrap();
        let covered = (cfg.grid_len() - 1) as f64 * cfg.spacing();
        let want = covered / (2.0 * cfg.half_width()) * (vt / 2.0).exp();
        let ci = bootstrap_mean(&zs, 400, 7).unwrap();
        let width = ci.hi - ci.lo;
        assert!(
            want > ci.lo - width && want < ci.hi + width,
            "want {want} ci [{}, {}]",
            ci.lo,
            ci.hi
        );
        let _ = mean(&zs);
    }

    #[test]
    fn good_event_monotone_in_a() {
        let sim = sim_t2(43);
        let cfg = &sim.config;
        let flags: Vec<(bool, bool, bool)> = sim
            .engine
            .map_fields(cfg, 500, &|_, s: &FieldSample| {
                (
                    good_event_flag(s, 0.5, cfg).unwrap(),
                    good_event_flag(s, 2.0, cfg).unwrap(),
                    good_event_flag(s, 1e9, cfg).unwrap(),
                )
            })
            .unwrap();
        for (small, mid, huge) in flags {
            assert!(huge, "a huge barrier holds for every sample");
            if small {
                assert!(mid, "events nest in A");
            }
        }
        let s = sim.engine.sample_field(cfg, 0).unwrap();
        assert!(good_event_flag(&s, -1.0, cfg).is_err());
    }

    #[test]
    fn high_point_measure_limits() {
        let sim = sim_t2(44);
        let cfg = &sim.config;
        let s = sim.engine.sample_field(cfg, 3).unwrap();
        let max = s.total().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Above the sample max: zero measure.
        assert_eq!(high_point_measure(&s, max + 0.1, None, cfg).unwrap(), 0.0);
        // Far below with the barrier disabled: the full covered fraction
        // n*s/(2hw), which is within a spacing of 1.
        let full = high_point_measure(&s, -1e9, None, cfg).unwrap();
        assert!(full > 0.99 && full <= 1.0, "full measure {full}");
        // Nonincreasing in V.
        let lo = high_point_measure(&s, 0.0, None, cfg).unwrap();
        let hi = high_point_measure(&s, 1.0, None, cfg).unwrap();
        assert!(hi <= lo);
    }

    #[test]
    fn markov_curve_and_ibp() {
        let sim = sim_t2(45);
        let cfg = &sim.config;
        let beta = critical_beta(cfg.t, cfg.alpha).unwrap();
        let report = moment_markov_curve(&sim, beta, &[1.0, 2.0, 4.0], 10_000).unwrap();
        // Nested events: P(Z_norm > A) nonincreasing in A.
        for w in report.p_znorm.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // Complement frequency of E_A decreasing in A.
        for w in report.e_ac_freq.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // Per-sample integration-by-parts identity within 1%.
        assert!(report.ibp_max_rel_err < 0.01, "ibp err {}", report.ibp_max_rel_err);
    }
}
