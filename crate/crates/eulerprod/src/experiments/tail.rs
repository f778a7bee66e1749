//! Tail estimates for the maximum of the field over the grid.

use serde::{Deserialize, Serialize};

use super::{RunStamp, Simulator};
use crate::config::ModelConfig;
use crate::covariance::build_toeplitz_on;
use crate::error::{Error, Result};
use crate::predict::{critical_beta, predicted_left_tail, predicted_right_tail, threshold_log_max};
use crate::sampler::SampleEngine;
use crate::stats::{wilson_interval, wls_slope};

/// Hits below this leave the CI too wide to use; the point is dropped
/// from slope fits and flagged.
pub const MIN_HITS_FOR_FIT: u64 = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub stamp: RunStamp,
    pub y_grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub hits: Vec<u64>,
    pub n: usize,
    pub p_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub predicted_shape: Vec<f64>,
    /// Points dropped from the fit for holding fewer than 20 hits.
    pub dropped: Vec<bool>,
    /// Exponential rate fitted after dividing out the predicted
    /// prefactor and Gaussian-correction factors (see `fit_rate`).
    pub fitted_slope: Option<f64>,
    pub fitted_stderr: Option<f64>,
    /// Slope of the raw log p_hat against y under the same weights,
    /// reported for reference; it mixes the rate with the curvature of
    /// the shape's non-exponential factors.
    pub fitted_slope_raw: Option<f64>,
    /// -2 sqrt(1+theta), the model's predicted log-tail decay rate in y.
    pub predicted_slope: f64,
}

impl TailReport {
    pub fn csv_header() -> &'static str {
        "y,threshold,hits,n,p_hat,ci_lo,ci_hi,predicted_shape,dropped"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        (0..self.y_grid.len())
            .map(|i| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    self.y_grid[i],
                    self.thresholds[i],
                    self.hits[i],
                    self.n,
                    self.p_hat[i],
                    self.ci_lo[i],
                    self.ci_hi[i],
                    self.predicted_shape[i],
                    self.dropped[i]
                )
            })
            .collect()
    }
}

fn tail_counts(maxima: &[f64], thresholds: &[f64]) -> Vec<u64> {
    thresholds
        .iter()
        .map(|&th| maxima.iter().filter(|&&m| m > th).count() as u64)
        .collect()
}

/// Estimate P(max_h S_t(h) > threshold(y)) over a nonnegative y-grid and
/// fit the log-tail slope by weighted least squares.
pub fn estimate_right_tail(sim: &Simulator, y_grid: &[f64], n: usize) -> Result<TailReport> {
    if y_grid.is_empty() || y_grid.windows(2).any(|w| w[1] <= w[0]) || y_grid[0] < 0.0 {
        return Err(Error::Domain("right tail needs a nonnegative ascending y grid".into()));
    }
    if n < 10_000 {
        return Err(Error::Domain(format!("right tail needs n >= 1e4, got {n}")));
    }
    let cfg = &sim.config;
    let maxima = sim.engine.map_total_max(cfg, n)?;
    let thresholds: Vec<f64> =
        y_grid.iter().map(|&y| threshold_log_max(cfg.t, cfg.alpha, y)).collect::<Result<_>>()?;
    let shape: Vec<f64> =
        y_grid.iter().map(|&y| predicted_right_tail(cfg.t, cfg.alpha, y)).collect::<Result<_>>()?;
    finish_tail_report(sim, y_grid, thresholds, &maxima, shape, n, true)
}

/// Estimate the same event for negative y; the report's predicted shape
/// is the left-tail deficiency envelope for 1 - p_hat.
pub fn estimate_left_tail(sim: &Simulator, y_grid: &[f64], n: usize) -> Result<TailReport> {
    if y_grid.is_empty() || y_grid.iter().any(|&y| y >= 0.0) {
        return Err(Error::Domain("left tail needs strictly negative y values".into()));
    }
    let cfg = &sim.config;
    let maxima = sim.engine.map_total_max(cfg, n)?;
    let thresholds: Vec<f64> =
        y_grid.iter().map(|&y| threshold_log_max(cfg.t, cfg.alpha, y)).collect::<Result<_>>()?;
    let shape: Vec<f64> =
        y_grid.iter().map(|&y| predicted_left_tail(cfg.t, cfg.alpha, y)).collect::<Result<_>>()?;
    finish_tail_report(sim, y_grid, thresholds, &maxima, shape, n, false)
}

fn finish_tail_report(
    sim: &Simulator,
    y_grid: &[f64],
    thresholds: Vec<f64>,
    maxima: &[f64],
    predicted_shape: Vec<f64>,
    n: usize,
    fit: bool,
) -> Result<TailReport> {
    let cfg = &sim.config;
    let hits = tail_counts(maxima, &thresholds);
    let mut p_hat = Vec::new();
    let mut ci_lo = Vec::new();
    let mut ci_hi = Vec::new();
    let mut dropped = Vec::new();
    for &h in &hits {
        let ci = wilson_interval(h, n as u64, 0.95)?;
        p_hat.push(ci.point);
        ci_lo.push(ci.lo);
        ci_hi.push(ci.hi);
        dropped.push(h < MIN_HITS_FOR_FIT);
    }
    let (fitted_slope, fitted_stderr, fitted_slope_raw) = if fit {
        fit_rate(cfg, y_grid, &p_hat, &hits, &dropped, n)?
    } else {
        (None, None, None)
    };
    Ok(TailReport {
        stamp: RunStamp::new(cfg, n, &sim.engine),
        y_grid: y_grid.to_vec(),
        thresholds,
        hits,
        n,
        p_hat,
        ci_lo,
        ci_hi,
        predicted_shape,
        dropped,
        fitted_slope,
        fitted_stderr,
        fitted_slope_raw,
        predicted_slope: -critical_beta(cfg.t, cfg.alpha)?,
    })
}

/// Systematic-error floor on log p_hat used in the fit weights: at desk
/// scale the shape deviates from a pure exponential by transients of
/// this order, which dominate the sampling error at well-populated
/// points; weighting by 1/(sampling + floor) keeps any single y from
/// dominating the rate estimate.
const LOG_P_MODEL_FLOOR: f64 = 0.25;

/// Weighted least-squares estimate of the exponential decay rate.
///
/// The tail shape is (1 + y/t^{1-alpha}) e^{-2 sqrt(1+theta) y}
/// e^{-y^2/t} up to a constant; dividing the known non-exponential
/// factors out of p_hat first makes the regression slope a consistent
/// estimate of -2 sqrt(1+theta) instead of a mixture of rate and
/// curvature. The raw-slope fit is returned alongside for reference.
fn fit_rate(
    cfg: &ModelConfig,
    y_grid: &[f64],
    p_hat: &[f64],
    hits: &[u64],
    dropped: &[bool],
    n: usize,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let t1 = (cfg.t as f64).powf(1.0 - cfg.alpha);
    let mut xs = Vec::new();
    let mut corrected = Vec::new();
    let mut raw = Vec::new();
    let mut ws = Vec::new();
    for i in 0..y_grid.len() {
        if dropped[i] || hits[i] >= n as u64 {
            continue;
        }
        let y = y_grid[i];
        let correction = (1.0 + y / t1).ln() - y * y / cfg.t as f64;
        xs.push(y);
        raw.push(p_hat[i].ln());
        corrected.push(p_hat[i].ln() - correction);
        let sampling_var = (1.0 - p_hat[i]) / hits[i] as f64;
        ws.push(1.0 / (sampling_var + LOG_P_MODEL_FLOOR * LOG_P_MODEL_FLOOR));
    }
    if xs.len() < 3 {
        return Ok((None, None, None));
    }
    let (slope, stderr) = wls_slope(&xs, &corrected, &ws)?;
    let (slope_raw, _) = wls_slope(&xs, &raw, &ws)?;
    Ok((Some(slope), Some(stderr), Some(slope_raw)))
}

/// Maximum of S_j over the refined subinterval |h| <= e^{-j}: the event
/// behaves like a single Gaussian of variance ~j/2, and log p_hat
/// regressed on y^2 has slope about -1/j.
pub fn small_interval_max_tail(
    bands: &crate::primes::BandTable,
    config: &ModelConfig,
    j: u32,
    y_grid: &[f64],
    n: usize,
) -> Result<TailReport> {
    if j < 1 || j > config.t {
        return Err(Error::Domain(format!("small interval needs 1 <= j <= t, got {j}")));
    }
    if y_grid.is_empty() || y_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("ascending y grid required".into()));
    }
    // At least 16 points inside [-e^{-j}, e^{-j}].
    let spacing = (-(j as f64)).exp() / 8.0;
    let n_grid = 17;
    let covs: Vec<_> = (1..=j)
        .map(|m| build_toeplitz_on(bands, m, m, spacing, n_grid))
        .collect::<Result<_>>()?;
    let engine = SampleEngine::toeplitz(std::sync::Arc::new(covs));
    let sub = Simulator::with_engine(config, engine);
    let maxima = sub.engine.map_total_max(config, n)?;

    let thresholds = y_grid.to_vec();
    let shape: Vec<f64> =
        y_grid.iter().map(|&y| (-y * y / j as f64).exp() / (j as f64).sqrt()).collect();
    let mut report = finish_tail_report(&sub, y_grid, thresholds, &maxima, shape, n, false)?;
    // Fit log p_hat against y^2 (not y): slope should be near -1/j.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in 0..y_grid.len() {
        if !report.dropped[i] && report.hits[i] < n as u64 {
            xs.push(y_grid[i] * y_grid[i]);
            ys.push(report.p_hat[i].ln());
            ws.push(report.hits[i] as f64 / (1.0 - report.p_hat[i]).max(1e-12));
        }
    }
    if xs.len() >= 3 {
        let (s, e) = wls_slope(&xs, &ys, &ws)?;
        report.fitted_slope = Some(s);
        report.fitted_stderr = Some(e);
        report.fitted_slope_raw = Some(s);
    }
    report.predicted_slope = -1.0 / j as f64;
    Ok(report)
}
