//! Numerical oracles for Gaussian-random-walk barrier probabilities.
//!
//! `ballot_dp` propagates the sub-barrier density by iterated Gaussian
//! convolution on a value grid; `ballot_mc` simulates walks. The two are
//! independent routes to the same probability and cross-check each other
//! everywhere they are used. On top of them sit sweep drivers that probe
//! the linear-barrier bounds (lower and upper) and the logarithmic
//! barrier, and a quadrature check of the two-dimensional Gaussian
//! comparison inequality.

use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{adaptive_simpson, normal_cdf, normal_pdf};
use crate::stats::stream;

/// Default DP value-grid step, sqrt(1/2)/16: empirically sufficient for
/// ~1e-5 absolute accuracy out to horizons of 128 steps.
pub fn default_grid_step() -> f64 {
    0.5f64.sqrt() / 16.0
}

/// Default DP extent: 8 standard deviations of the terminal value.
pub fn default_grid_extent(q: &BallotQuery) -> f64 {
    8.0 * q.sigma2.iter().sum::<f64>().sqrt()
}

/// Walk-below-barrier query: P(forall 1<=l<=j: S_l <= b(l), S_j in I_x),
/// with I_x = (x, x+delta] for x>0, (x-delta, x] for x<0, [-delta, delta]
/// at x=0. An optional start gate (r, g) additionally requires
/// |S_r| <= g; barrier entries may be +infinity to disable a step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallotQuery {
    pub horizon: usize,
    pub sigma2: Vec<f64>,
    pub barrier: Vec<f64>,
    pub x: f64,
    pub delta: f64,
    pub start_gate: Option<(usize, f64)>,
}

impl BallotQuery {
    pub fn new(sigma2: Vec<f64>, barrier: Vec<f64>, x: f64, delta: f64) -> Result<Self> {
        let horizon = sigma2.len();
        if horizon == 0 || barrier.len() != horizon {
            return Err(Error::Domain("ballot query: sigma2/barrier length mismatch".into()));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Domain(format!(
                "ballot query: delta in (0,1] required, got {delta}"
            )));
        }
        if sigma2.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("ballot query: increment variances must be positive".into()));
        }
        Ok(BallotQuery { horizon, sigma2, barrier, x, delta, start_gate: None })
    }

    /// Linear barrier b(l) = a*l + b0 with common variance 1/2.
    pub fn linear(j: usize, a: f64, b0: f64, x: f64, delta: f64) -> Result<Self> {
        let barrier = (1..=j).map(|l| a * l as f64 + b0).collect();
        BallotQuery::new(vec![0.5; j], barrier, x, delta)
    }

    /// The window I_x, closed on the side touching x.
    pub fn window(&self) -> (f64, f64) {
        if self.x > 0.0 {
            (self.x, self.x + self.delta)
        } else if self.x < 0.0 {
            (self.x - self.delta, self.x)
        } else {
            (-self.delta, self.delta)
        }
    }
}

/// Dynamic-programming evaluation by iterated Gaussian convolution,
/// truncating above the barrier at each step; converges as the grid
/// step shrinks (see [`ballot_dp_refined`] for the Richardson check).
pub fn ballot_dp(q: &BallotQuery, grid_step: f64, grid_extent: f64) -> Result<f64> {
    let min_sigma = q.sigma2.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    if !(grid_step > 0.0) || grid_step > min_sigma / 8.0 {
        return Err(Error::Resolution(format!(
            "grid_step {grid_step} must be positive and <= min sigma/8 = {}",
            min_sigma / 8.0
        )));
    }
    if grid_extent < 8.0 * q.sigma2.iter().sum::<f64>().sqrt() {
        return Err(Error::Resolution(format!(
            "grid_extent {grid_extent} below 8 terminal standard deviations"
        )));
    }
    let half_cells = (grid_extent / grid_step).ceil() as i64;
    let n = (2 * half_cells + 1) as usize;
    let center = |i: usize| (i as i64 - half_cells) as f64 * grid_step;

    // Step 1: exact Gaussian cell masses from the origin.
    let sigma1 = q.sigma2[0].sqrt();
    let mut mass: Vec<f64> = (0..n)
        .map(|i| {
            let c = center(i);
            normal_cdf((c + 0.5 * grid_step) / sigma1)
                - normal_cdf((c - 0.5 * grid_step) / sigma1)
        })
        .collect();
    truncate_above(&mut mass, q.barrier[0], grid_step, half_cells);
    apply_gate(&mut mass, q, 1, grid_step, half_cells);

    let mut next = vec![0.0f64; n];
    for l in 2..=q.horizon {
        let sigma = q.sigma2[l - 1].sqrt();
        let reach = (8.0 * sigma / grid_step).ceil() as i64;
        // Cell-mass kernel of the increment.
        let kernel: Vec<f64> = (-reach..=reach)
            .map(|r| {
                let c = r as f64 * grid_step;
                normal_cdf((c + 0.5 * grid_step) / sigma)
                    - normal_cdf((c - 0.5 * grid_step) / sigma)
            })
            .collect();
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let lo = (i as i64 - reach).max(0) as usize;
            let hi = ((i as i64 + reach) as usize).min(n - 1);
            let base = i as i64 - reach;
            for target in lo..=hi {
                next[target] += m * kernel[(target as i64 - base) as usize];
            }
        }
        std::mem::swap(&mut mass, &mut next);
        truncate_above(&mut mass, q.barrier[l - 1], grid_step, half_cells);
        apply_gate(&mut mass, q, l, grid_step, half_cells);
    }

    let (w_lo, w_hi) = q.window();
    Ok(window_mass(&mass, w_lo, w_hi, grid_step, half_cells))
}

/// DP at the default resolution plus a half-step refinement; returns
/// (refined value, |coarse - refined|) so callers can check convergence.
pub fn ballot_dp_refined(q: &BallotQuery) -> Result<(f64, f64)> {
    let step = default_grid_step();
    let extent = default_grid_extent(q);
    let coarse = ballot_dp(q, step, extent)?;
    let fine = ballot_dp(q, step / 2.0, extent)?;
    Ok((fine, (coarse - fine).abs()))
}

/// Cumulative mass at cell edges (exact partial sums) with a monotone
/// cubic read-out inside cells; keeps sharp barrier/window edges at
/// O(step^4) accuracy instead of the O(step^2) of fractional cells.
struct Cumulative {
    prefix: Vec<f64>,
    step: f64,
    half_cells: i64,
}

impl Cumulative {
    fn new(mass: &[f64], step: f64, half_cells: i64) -> Self {
        let mut prefix = Vec::with_capacity(mass.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &m in mass {
            acc += m;
            prefix.push(acc);
        }
        Cumulative { prefix, step, half_cells }
    }

    /// Left edge of cell 0.
    fn origin(&self) -> f64 {
        (-self.half_cells) as f64 * self.step - 0.5 * self.step
    }

    fn at(&self, p: f64) -> f64 {
        let n = self.prefix.len() - 1;
        let xi = (p - self.origin()) / self.step;
        if xi <= 0.0 {
            return 0.0;
        }
        if xi >= n as f64 {
            return self.prefix[n];
        }
        let j = xi.floor() as usize;
        let frac = xi - j as f64;
        if j == 0 || j + 2 > n {
            // Not enough neighbors for the cubic; ends carry ~no mass.
            return self.prefix[j] + frac * (self.prefix[j + 1] - self.prefix[j]);
        }
        // 4-point Lagrange on the equispaced edges j-1..j+2, s in [1,2].
        let s = frac + 1.0;
        let (c0, c1, c2, c3) =
            (self.prefix[j - 1], self.prefix[j], self.prefix[j + 1], self.prefix[j + 2]);
        let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        let v = c0 * l0 + c1 * l1 + c2 * l2 + c3 * l3;
        // The cumulative is monotone; the cubic may overshoot slightly.
        v.clamp(c1, c2)
    }

    fn between(&self, lo: f64, hi: f64) -> f64 {
        (self.at(hi) - self.at(lo)).max(0.0)
    }
}

fn truncate_above(mass: &mut [f64], barrier: f64, step: f64, half_cells: i64) {
    if barrier == f64::INFINITY {
        return;
    }
    let cum = Cumulative::new(mass, step, half_cells);
    let origin = cum.origin();
    for (i, m) in mass.iter_mut().enumerate() {
        if *m == 0.0 {
            continue;
        }
        let lo = origin + i as f64 * step;
        let hi = lo + step;
        if lo >= barrier {
            *m = 0.0;
        } else if hi > barrier {
            *m = cum.between(lo, barrier).min(*m);
        }
    }
}

fn apply_gate(mass: &mut [f64], q: &BallotQuery, l: usize, step: f64, half_cells: i64) {
    if let Some((r, gate)) = q.start_gate {
        if l == r {
            let cum = Cumulative::new(mass, step, half_cells);
            let origin = cum.origin();
            for (i, m) in mass.iter_mut().enumerate() {
                if *m == 0.0 {
                    continue;
                }
                let lo = origin + i as f64 * step;
                let hi = lo + step;
                let keep_lo = lo.max(-gate);
                let keep_hi = hi.min(gate);
                if keep_hi <= keep_lo {
                    *m = 0.0;
                } else {
                    *m = cum.between(keep_lo, keep_hi).min(*m);
                }
            }
        }
    }
}

fn window_mass(mass: &[f64], w_lo: f64, w_hi: f64, step: f64, half_cells: i64) -> f64 {
    Cumulative::new(mass, step, half_cells).between(w_lo, w_hi)
}

/// Monte Carlo oracle: simulate n walks, return (hit fraction, binomial
/// standard error). Deterministic given the seed, parallel over walks.
pub fn ballot_mc(q: &BallotQuery, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 1000 {
        return Err(Error::Domain(format!("ballot_mc needs n >= 1000, got {n}")));
    }
    let (w_lo, w_hi) = q.window();
    let hits: u64 = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "ballot-mc", i);
            let mut s = 0.0f64;
            for l in 1..=q.horizon {
                let z: f64 = rng.sample(StandardNormal);
                s += z * q.sigma2[l - 1].sqrt();
                if s > q.barrier[l - 1] {
                    return 0u64;
                }
                if let Some((r, gate)) = q.start_gate {
                    if l == r && s.abs() > gate {
                        return 0u64;
                    }
                }
            }
            u64::from(s > w_lo && s <= w_hi)
        })
        .sum();
    let p = hits as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearBound {
    /// Lower bound: P >> b(0)(b(j)-x) delta e^{-c x^2/j} / j^{3/2},
    /// hypothesis (b(j)-x) b(0) <= j.
    LowerA1,
    /// Upper bound: P << (b(0)+1)(b(j)-x+1) / j^{3/2}, hypotheses
    /// b(0) > 0 and x <= b(j), variance 1/2.
    UpperA2,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearSweepPoint {
    pub j: usize,
    pub a: f64,
    pub b0: f64,
    pub x: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropRow {
    pub label: String,
    pub dp: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub skipped: Option<String>,
}

/// Ratio report of DP probabilities against a proposition's envelope.
/// The propositions predict ratios bounded away from 0 (lower bounds)
/// or bounded above (upper bounds) uniformly over the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropReport {
    pub rows: Vec<PropRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// For the lower bound: the fitted exponent constant c >= 1 (the
    /// proposition leaves it unspecified); reported, never asserted.
    pub fitted_c: Option<f64>,
}

impl PropReport {
    fn from_rows(rows: Vec<PropRow>, fitted_c: Option<f64>) -> Self {
        let kept: Vec<f64> = rows.iter().filter(|r| r.skipped.is_none()).map(|r| r.ratio).collect();
        let min_ratio = kept.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_ratio = kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        PropReport { rows, min_ratio, max_ratio, fitted_c }
    }
}

/// Check a linear-barrier ballot bound over a sweep. Sweep points that
/// violate the proposition's hypotheses are skipped and flagged.
pub fn check_prop_linear(sweep: &[LinearSweepPoint], kind: LinearBound) -> Result<PropReport> {
    if sweep.is_empty() {
        return Err(Error::Domain("empty sweep".into()));
    }
    let mut dps = Vec::with_capacity(sweep.len());
    for p in sweep {
        let bj = p.a * p.j as f64 + p.b0;
        let hypothesis = match kind {
            LinearBound::LowerA1 => {
                if (bj - p.x) * p.b0 > p.j as f64 {
                    Some(format!("(b(j)-x) b(0) = {} > j = {}", (bj - p.x) * p.b0, p.j))
                } else {
                    None
                }
            }
            LinearBound::UpperA2 => {
                if p.b0 <= 0.0 {
                    Some(format!("b(0) = {} not positive", p.b0))
                } else if p.x > bj {
                    Some(format!("x = {} above b(j) = {bj}", p.x))
                } else {
                    None
                }
            }
        };
        if hypothesis.is_some() {
            dps.push((f64::NAN, hypothesis));
            continue;
        }
        let q = BallotQuery::linear(p.j, p.a, p.b0, p.x, p.delta)?;
        let dp = ballot_dp(&q, default_grid_step(), default_grid_extent(&q))?;
        dps.push((dp, None));
    }

    match kind {
        LinearBound::UpperA2 => {
            let rows = sweep
                .iter()
                .zip(&dps)
                .map(|(p, (dp, skipped))| {
                    let bj = p.a * p.j as f64 + p.b0;
                    let envelope = (p.b0 + 1.0) * (bj - p.x + 1.0) / (p.j as f64).powf(1.5);
                    PropRow {
                        label: format!("j={} a={} b0={} x={}", p.j, p.a, p.b0, p.x),
                        dp: *dp,
                        envelope,
                        ratio: dp / envelope,
                        skipped: skipped.clone(),
                    }
                })
                .collect();
            Ok(PropReport::from_rows(rows, None))
        }
        LinearBound::LowerA1 => {
            // Fit the unspecified exponent constant: pick the c >= 1 that
            // makes the ratio sweep flattest (smallest max/min spread).
            let envelope_at = |p: &LinearSweepPoint, c: f64| {
                let bj = p.a * p.j as f64 + p.b0;
                p.b0 * (bj - p.x) * p.delta / (p.j as f64).powf(1.5)
                    * (-c * p.x * p.x / p.j as f64).exp()
            };
            let candidates = [1.0, 1.5, 2.0, 3.0, 5.0];
            let spread_for = |c: f64| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (p, (dp, skipped)) in sweep.iter().zip(&dps) {
                    if skipped.is_some() {
                        continue;
                    }
                    let ratio = dp / envelope_at(p, c);
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
                hi / lo
            };
            let best_c = candidates
                .iter()
                .cloned()
                .min_by(|&a, &b| spread_for(a).partial_cmp(&spread_for(b)).unwrap())
                .unwrap();
            let rows = sweep
                .iter()
                .zip(&dps)
                .map(|(p, (dp, skipped))| {
                    let envelope = envelope_at(p, best_c);
                    PropRow {
                        label: format!("j={} a={} b0={} x={}", p.j, p.a, p.b0, p.x),
                        dp: *dp,
                        envelope,
                        ratio: dp / envelope,
                        skipped: skipped.clone(),
                    }
                })
                .collect();
            Ok(PropReport::from_rows(rows, Some(best_c)))
        }
    }
}

/// Logarithmic-barrier ballot check: walk free up to r = round(y) with
/// |S_r| <= 3r, then below y + psi_j out to k, ending in I_x; compared
/// against the envelope (y+1)(y+psi_k-x+1) e^{-x^2/k} / k^{3/2}.
/// x runs over {0, psi_k/2, psi_k} filtered by -20k < x <= psi_k.
pub fn check_prop_log(t: u32, ks: &[u32], y: f64) -> Result<PropReport> {
    let tf = t as f64;
    if y < 1.0 || y > tf / (10.0 * tf.ln()) {
        return Err(Error::Hypothesis(format!(
            "log-barrier check needs 1 <= y <= t/(10 log t) = {:.3}",
            tf / (10.0 * tf.ln())
        )));
    }
    let r = y.round() as usize;
    let psi = |j: u32| -> f64 {
        if j == 0 || j == t {
            0.0
        } else {
            (j.min(t - j) as f64).ln()
        }
    };
    let mut rows = Vec::new();
    for &k in ks {
        if (k as f64) < tf / tf.ln() || k > t {
            rows.push(PropRow {
                label: format!("k={k}"),
                dp: f64::NAN,
                envelope: f64::NAN,
                ratio: f64::NAN,
                skipped: Some(format!("k outside [t/log t, t] = [{:.2}, {t}]", tf / tf.ln())),
            });
            continue;
        }
        let psi_k = psi(k);
        for x in [0.0, psi_k / 2.0, psi_k] {
            if !(x > -20.0 * k as f64 && x <= psi_k) {
                continue;
            }
            let mut barrier = vec![f64::INFINITY; k as usize];
            for j in (r + 1)..=(k as usize) {
                barrier[j - 1] = y + psi(j as u32);
            }
            let mut q = BallotQuery::new(vec![0.5; k as usize], barrier, x, 1.0)?;
            q.start_gate = Some((r, 3.0 * r as f64));
            let dp = ballot_dp(&q, default_grid_step(), default_grid_extent(&q))?;
            let envelope = (y + 1.0) * (y + psi_k - x + 1.0) / (k as f64).powf(1.5)
                * (-x * x / k as f64).exp();
            rows.push(PropRow {
                label: format!("k={k} x={x:.3}"),
                dp,
                envelope,
                ratio: dp / envelope,
                skipped: None,
            });
        }
    }
    Ok(PropReport::from_rows(rows, None))
}

/// Query for the two-dimensional Gaussian comparison inequality:
/// P((N1,N1') in A) <= sqrt((s2+|rho|)/(s2-|rho|)) P((N2,N2') in A),
/// where (N1,N1') has covariance [[s2, rho],[rho, s2]] and (N2,N2') is
/// iid with variance s2+|rho|; A is a rectangle (bounds may be infinite).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComparisonQuery {
    pub s2: f64,
    pub rho: f64,
    pub rect: [(f64, f64); 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub holds: bool,
}

pub fn gaussian_comparison_check(q: &ComparisonQuery) -> Result<ComparisonOutcome> {
    if !(q.rho.abs() < q.s2) {
        return Err(Error::Domain(format!("|rho| = {} must be < s2 = {}", q.rho.abs(), q.s2)));
    }
    for (lo, hi) in q.rect {
        if !(lo < hi) {
            return Err(Error::Domain(format!("degenerate rectangle side [{lo}, {hi}]")));
        }
    }
    let lhs = bivariate_rect_prob(q.s2, q.rho, q.rect)?;
    let sd2 = (q.s2 + q.rho.abs()).sqrt();
    let one_d = |lo: f64, hi: f64| normal_cdf(hi / sd2) - normal_cdf(lo / sd2);
    let p2 = one_d(q.rect[0].0, q.rect[0].1) * one_d(q.rect[1].0, q.rect[1].1);
    let factor = ((q.s2 + q.rho.abs()) / (q.s2 - q.rho.abs())).sqrt();
    let rhs = factor * p2;
    Ok(ComparisonOutcome { lhs, rhs, factor, holds: lhs <= rhs + 1e-8 })
}

/// Rectangle probability of a centered bivariate normal with covariance
/// [[s2, rho],[rho, s2]] by conditioning: X ~ N(0, s2),
/// Y | X=x ~ N(rho x / s2, s2 - rho^2/s2).
fn bivariate_rect_prob(s2: f64, rho: f64, rect: [(f64, f64); 2]) -> Result<f64> {
    let sd = s2.sqrt();
    let cond_var = s2 - rho * rho / s2;
    if !(cond_var > 0.0) {
        return Err(Error::Quadrature("conditional variance not positive".into()));
    }
    let cond_sd = cond_var.sqrt();
    let clamp = 10.0 * sd;
    let (x_lo, x_hi) = (rect[0].0.max(-clamp), rect[0].1.min(clamp));
    if x_lo >= x_hi {
        return Ok(0.0);
    }
    let (y_lo, y_hi) = rect[1];
    let f = |x: f64| {
        let m = rho * x / s2;
        let fy = normal_cdf((y_hi - m) / cond_sd) - normal_cdf((y_lo - m) / cond_sd);
        normal_pdf(x / sd) / sd * fy
    };
    Ok(adaptive_simpson(&f, x_lo, x_hi, 1e-11))
}
