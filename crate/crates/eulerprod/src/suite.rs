//! The desk verification suite: eleven pinned criteria covering bands,
//! covariance structure, sampler equivalence, the Gaussian MGF identity,
//! tail slopes, ballot oracles, the first-hitting partition,
//! Paley-Zygmund consistency, and the critical-moment machinery.
//!
//! Runtime limits are stated for an 8-core machine; on smaller hosts the
//! allowance scales by 8/cores. Everything else is absolute.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ballot::{
    ballot_dp, ballot_dp_refined, ballot_mc, check_prop_linear, default_grid_extent,
    default_grid_step, gaussian_comparison_check, BallotQuery, ComparisonQuery, LinearBound,
    LinearSweepPoint,
};
use crate::config::{ModelConfig, SamplingMode};
use crate::covariance::{band_toeplitz_set, covariance_exact, covariance_surrogate};
use crate::error::Result;
use crate::experiments::{
    count_exceedances, estimate_left_tail, estimate_right_tail, first_hitting_histogram,
    moment_markov_curve, Simulator,
};
use crate::predict::{critical_beta, predicted_right_tail, BarrierKind, BarrierSpec};
use crate::primes::{mertens_residuals, sieve_bands, surrogate_bands, BandTable};
use crate::sampler::{sample_direct, sample_toeplitz, FieldSample, SampleEngine};
use crate::stats::{bootstrap_mean, bootstrap_quantile, mean, variance, wilson_interval};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeskReport {
    pub outcomes: Vec<CriterionOutcome>,
    pub cache_build_secs: f64,
    pub experiment_secs: f64,
    pub cores: usize,
    pub seed: u64,
}

impl DeskReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .outcomes
            .iter()
            .map(|o| {
                format!(
                    "criterion {:02} [{}] {}: {}",
                    o.id,
                    o.label,
                    if o.passed { "PASS" } else { "FAIL" },
                    o.detail
                )
            })
            .collect();
        out.push(format!(
            "cache build {:.1}s, experiments {:.1}s on {} cores (seed {})",
            self.cache_build_secs, self.experiment_secs, self.cores, self.seed
        ));
        out
    }
}

fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Stated limits assume 8 cores; scale the allowance on smaller hosts.
fn runtime_allowance(stated_secs: f64) -> f64 {
    let c = cores().min(8) as f64;
    stated_secs * 8.0 / c.max(1.0)
}

/// The expensive shared state of the desk suite (sieve, covariance
/// rows, engines); exposed so the acceptance harness can verify module
/// invariants pinned at t=3 on the same build.
pub struct DeskContext {
    pub cfg3: ModelConfig,
    pub bands3: Arc<BandTable>,
    pub sim3: Simulator,
    pub cfg3_hi_alpha: ModelConfig,
    pub sim3_hi_alpha: Simulator,
    pub cfg2: ModelConfig,
    pub bands2: Arc<BandTable>,
    pub sim2: Simulator,
    pub cfg8: ModelConfig,
    pub bands8: Arc<BandTable>,
    pub sieve_secs: f64,
    pub mertens: Vec<f64>,
}

fn build_ctx(seed: u64) -> Result<DeskContext> {
    let cfg3 = ModelConfig::new(3, 0.5, SamplingMode::ExactPrime)?.with_seed(seed);
    let sieve_start = Instant::now();
    let bands3 = Arc::new(sieve_bands(&cfg3)?);
    let sieve_secs = sieve_start.elapsed().as_secs_f64();
    let mertens = mertens_residuals(&[1e6, 1e8])?;

    let covs3 = Arc::new(band_toeplitz_set(&bands3, &cfg3)?);
    let sim3 = Simulator::from_toeplitz(&cfg3, covs3);

    let cfg3_hi_alpha = ModelConfig::new(3, 0.75, SamplingMode::ExactPrime)?.with_seed(seed ^ 0xA5);
    let covs3_hi = Arc::new(band_toeplitz_set(&bands3, &cfg3_hi_alpha)?);
    let sim3_hi_alpha = Simulator::from_toeplitz(&cfg3_hi_alpha, covs3_hi);

    let cfg2 = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime)?.with_seed(seed ^ 0x51);
    let bands2 = Arc::new(sieve_bands(&cfg2)?);
    let covs2 = Arc::new(band_toeplitz_set(&bands2, &cfg2)?);
    let sim2 = Simulator::from_toeplitz(&cfg2, covs2);

    let cfg8 = ModelConfig::new(8, 0.5, SamplingMode::Surrogate)?.with_seed(seed ^ 0x88);
    let bands8 = Arc::new(surrogate_bands(&cfg8)?);

    Ok(DeskContext {
        cfg3,
        bands3,
        sim3,
        cfg3_hi_alpha,
        sim3_hi_alpha,
        cfg2,
        bands2,
        sim2,
        cfg8,
        bands8,
        sieve_secs,
        mertens,
    })
}

fn outcome(id: u32, label: &str, passed: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome { id, label: label.to_string(), passed, detail }
}

fn c1_bands_mertens(ctx: &DeskContext) -> CriterionOutcome {
    let s1 = ctx.bands3.band(1).variance;
    let s2 = ctx.bands3.band(2).variance;
    let s3 = ctx.bands3.band(3).variance;
    let res_gap = (ctx.mertens[1] - ctx.mertens[0]).abs();
    let sieve_limit = runtime_allowance(600.0);
    let ok = (s1 - 0.4220113).abs() <= 1e-6
        && (s2 - 0.5).abs() <= 0.08
        && (s3 - 0.5).abs() <= 0.08
        && res_gap < 0.01
        && ctx.sieve_secs <= sieve_limit;
    outcome(
        1,
        "bands-mertens",
        ok,
        format!(
            "sigma1^2={s1:.7} (want 0.4220113+/-1e-6), |sigma2^2-1/2|={:.4}, \
             |sigma3^2-1/2|={:.4} (<=0.08), |res(1e8)-res(1e6)|={res_gap:.5} (<0.01), \
             sieve {:.1}s (limit {:.0}s)",
            (s2 - 0.5).abs(),
            (s3 - 0.5).abs(),
            ctx.sieve_secs,
            sieve_limit
        ),
    )
}

fn c2_covariance_structure(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let bands = &ctx.bands3;
    let cfg = &ctx.cfg3;
    let n = cfg.grid_len();
    let s = cfg.spacing();

    // PSD after at most one jitter: the builder either succeeds with a
    // single recorded jitter or errors; success here is the check.
    let covs = band_toeplitz_set(bands, cfg)?;
    let jitters: Vec<f64> = covs.iter().map(|c| c.jitter).collect();

    // Evenness and band additivity at every grid lag, to 1e-10.
    let mut worst_even = 0.0f64;
    let mut worst_add = 0.0f64;
    for lag in 0..n {
        let dh = lag as f64 * s;
        let plus = covariance_exact(bands, 1, 3, dh)?;
        let minus = covariance_exact(bands, 1, 3, -dh)?;
        worst_even = worst_even.max((plus - minus).abs());
        let per_band: f64 =
            (1..=3).map(|m| covariance_exact(bands, m, m, dh)).sum::<Result<f64>>()?;
        worst_add = worst_add.max((plus - per_band).abs());
    }

    // Surrogate vs exact per band for m >= 2, every grid lag, 0.03.
    let mut worst_gap = [0.0f64; 2];
    for lag in 0..n {
        let dh = lag as f64 * s;
        for (i, m) in [2u32, 3].iter().enumerate() {
            let exact = covariance_exact(bands, *m, *m, dh)?;
            let sur = covariance_surrogate(*m, *m, dh)?;
            worst_gap[i] = worst_gap[i].max((exact - sur).abs());
        }
    }

    let ok = worst_even <= 1e-10
        && worst_add <= 1e-10
        && worst_gap.iter().all(|&g| g <= 0.03);
    Ok(outcome(
        2,
        "covariance-structure",
        ok,
        format!(
            "jitters={jitters:?}, evenness worst {worst_even:.2e} (<=1e-10), additivity worst \
             {worst_add:.2e} (<=1e-10), surrogate-vs-exact worst band2 {:.4} band3 {:.4} (<=0.03)",
            worst_gap[0], worst_gap[1]
        ),
    ))
}

fn c3_sampler_equivalence(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n_samp = 2000usize;
    let cfg_d = ctx.cfg2.clone();
    let cfg_t = ctx.cfg2.clone().with_seed(ctx.cfg2.seed ^ 0xD1CE);
    let n = cfg_d.grid_len();

    let direct: Vec<Vec<f64>> =
        (0..n_samp).map(|i| sample_direct(&ctx.bands2, &cfg_d, i as u64).total()).collect();
    let covs = match &ctx.sim2.engine {
        SampleEngine::Toeplitz { covs } => covs.clone(),
        _ => unreachable!(),
    };
    let toeplitz: Vec<Vec<f64>> = (0..n_samp)
        .map(|i| sample_toeplitz(&covs, cfg_t.seed, i as u64).map(|s| s.total()))
        .collect::<Result<_>>()?;

    let per_point_var = |samples: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|g| {
                let col: Vec<f64> = samples.iter().map(|s| s[g]).collect();
                variance(&col)
            })
            .collect()
    };
    let vd = per_point_var(&direct);
    let vt = per_point_var(&toeplitz);
    // Grid-averaged per-point variance; per-point gaps at N=2000 carry
    // ~4.5% noise and are reported as diagnostics only.
    let vd_mean = mean(&vd);
    let vt_mean = mean(&vt);
    let rel = (vd_mean - vt_mean).abs() / vt_mean;
    let worst_point = vd
        .iter()
        .zip(&vt)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0f64, f64::max);

    let max_of = |samples: &[Vec<f64>]| -> Vec<f64> {
        samples
            .iter()
            .map(|s| s.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    };
    let md = max_of(&direct);
    let mt = max_of(&toeplitz);
    let mut quantile_ok = true;
    let mut qdetail = String::new();
    for &q in &[0.5, 0.9, 0.99] {
        let cd = bootstrap_quantile(&md, q, 800, cfg_d.seed ^ 0xB00)?;
        let ct = bootstrap_quantile(&mt, q, 800, cfg_t.seed ^ 0xB01)?;
        let overlap = cd.overlaps(&ct);
        quantile_ok &= overlap;
        qdetail.push_str(&format!(
            " q{:.0}%: [{:.3},{:.3}] vs [{:.3},{:.3}]{}",
            q * 100.0,
            cd.lo,
            cd.hi,
            ct.lo,
            ct.hi,
            if overlap { "" } else { " DISJOINT" }
        ));
    }

    let ok = rel <= 0.05 && quantile_ok;
    Ok(outcome(
        3,
        "sampler-equivalence",
        ok,
        format!(
            "grid-mean variance gap {:.2}% (<=5%), worst single-point gap {:.1}% (diagnostic);{}",
            rel * 100.0,
            worst_point * 100.0,
            qdetail
        ),
    ))
}

fn c4_mgf_identity(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n = 100_000usize;
    let start = Instant::now();
    let cfg = &ctx.cfg3;
    let mid = cfg.grid_len() / 2;
    let vals =
        ctx.sim3.engine.map_fields(cfg, n, &|_, s: &FieldSample| {
            s.total()[mid].exp()
        })?;
    let elapsed = start.elapsed().as_secs_f64();
    let vt = ctx.bands3.total_variance();
    let want = (vt / 2.0).exp();
    let got = mean(&vals);
    let ci = bootstrap_mean(&vals, 500, cfg.seed ^ 0x4)?;
    let se = (ci.hi - ci.lo) / (2.0 * 1.959964);
    let limit = runtime_allowance(120.0);
    let ok = (got - want).abs() <= 3.0 * se && elapsed <= limit;
    Ok(outcome(
        4,
        "mgf-identity",
        ok,
        format!(
            "mean e^S = {got:.4} vs e^(V_t/2) = {want:.4} (V_t={vt:.5}), |diff|/se = {:.2} (<=3), \
             {elapsed:.0}s (limit {limit:.0}s)",
            (got - want).abs() / se
        ),
    ))
}

fn c5_right_tail_slopes(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let y_grid = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
    let n = 200_000usize;
    let limit = runtime_allowance(600.0);

    let start = Instant::now();
    let exact = estimate_right_tail(&ctx.sim3, &y_grid, n)?;
    let exact_secs = start.elapsed().as_secs_f64();
    let monotone_exact = exact.p_hat.windows(2).all(|w| w[1] <= w[0]);
    let want3 = -critical_beta(3, 0.5)?;
    let slope3 = exact.fitted_slope.unwrap_or(f64::NAN);

    let start = Instant::now();
    let sim8 = Simulator::from_table(&ctx.cfg8, &ctx.bands8)?;
    let sur = estimate_right_tail(&sim8, &y_grid, n)?;
    let sur_secs = start.elapsed().as_secs_f64();
    let monotone_sur = sur.p_hat.windows(2).all(|w| w[1] <= w[0]);
    let want8 = -critical_beta(8, 0.5)?;
    let slope8 = sur.fitted_slope.unwrap_or(f64::NAN);

    let ok = (slope3 - want3).abs() <= 0.35
        && monotone_exact
        && (slope8 - want8).abs() <= 0.25
        && monotone_sur
        && exact_secs <= limit
        && sur_secs <= limit;
    Ok(outcome(
        5,
        "right-tail-slopes",
        ok,
        format!(
            "t=3 exact slope {slope3:.3} vs {want3:.4} (+/-0.35), monotone={monotone_exact}, \
             {exact_secs:.0}s; t=8 surrogate slope {slope8:.3} vs {want8:.4} (+/-0.25), \
             monotone={monotone_sur}, {sur_secs:.0}s (limit {limit:.0}s each)",
        ),
    ))
}

fn c6_left_tail(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n = 10_000usize;
    let report = estimate_left_tail(&ctx.sim3, &[-4.0, -3.0, -2.0], n)?;
    let p_at_m4 = report.p_hat[0];
    // Deficiency 1-p decreases as y decreases; on a fixed sample set the
    // events nest, so this must hold exactly.
    let deficiency_monotone =
        report.p_hat.windows(2).all(|w| (1.0 - w[0]) <= (1.0 - w[1]) + 1e-15);
    let ok = p_at_m4 >= 0.95 && deficiency_monotone;
    Ok(outcome(
        6,
        "left-tail",
        ok,
        format!(
            "p(y=-4) = {p_at_m4:.4} (>=0.95), deficiencies {:?} nonincreasing as y decreases: {}",
            report.p_hat.iter().map(|p| 1.0 - p).collect::<Vec<_>>(),
            deficiency_monotone
        ),
    ))
}

fn c7_ballot_oracles(ctx: &DeskContext) -> Result<CriterionOutcome> {
    // j=1 closed form: erf(0.5).
    let q1 = BallotQuery::new(vec![0.5], vec![1.0], 0.0, 0.5)?;
    let dp1 = ballot_dp(&q1, default_grid_step(), default_grid_extent(&q1))?;
    let closed = libm::erf(0.5);
    let dp_gap = (dp1 - closed).abs();
    let (mc1, se1) = ballot_mc(&q1, 1_000_000, ctx.cfg3.seed ^ 0x7)?;
    let mc_gap_se = (mc1 - closed).abs() / se1;

    // Prop A.2 sweep.
    let sweep: Vec<LinearSweepPoint> = [8usize, 16, 32, 64]
        .iter()
        .map(|&j| {
            let bj = 0.2 * j as f64 + 2.0;
            LinearSweepPoint { j, a: 0.2, b0: 2.0, x: bj / 2.0, delta: 1.0 }
        })
        .collect();
    let a2 = check_prop_linear(&sweep, LinearBound::UpperA2)?;
    let spread = a2.max_ratio / a2.min_ratio;

    // Richardson at the standard j=16 query.
    let q16 = BallotQuery::linear(16, 0.2, 2.0, 1.0, 1.0)?;
    let (_, richardson) = ballot_dp_refined(&q16)?;

    // Gaussian comparison over the rectangle sweep, orthant case pinned.
    let orthant = gaussian_comparison_check(&ComparisonQuery {
        s2: 1.0,
        rho: 0.5,
        rect: [(f64::NEG_INFINITY, 0.0), (f64::NEG_INFINITY, 0.0)],
    })?;
    let mut comparison_ok = orthant.holds
        && (orthant.lhs - 0.3333333).abs() <= 1e-6
        && (orthant.rhs - 0.4330127).abs() <= 1e-6;
    for &(s2, rho) in &[(1.0, 0.3), (1.0, -0.6), (2.0, 1.2), (0.7, 0.5), (1.0, 0.95)] {
        for rect in [
            [(-1.0, 0.5), (0.0, 2.0)],
            [(f64::NEG_INFINITY, 0.0), (-0.5, f64::INFINITY)],
            [(0.5, f64::INFINITY), (0.5, f64::INFINITY)],
        ] {
            let out = gaussian_comparison_check(&ComparisonQuery { s2, rho, rect })?;
            comparison_ok &= out.holds;
        }
    }

    let ok = dp_gap <= 1e-6 && mc_gap_se <= 3.0 && spread <= 4.0 && richardson < 1e-4
        && comparison_ok;
    Ok(outcome(
        7,
        "ballot-oracles",
        ok,
        format!(
            "j=1 dp gap {dp_gap:.2e} (<=1e-6), mc gap {mc_gap_se:.2}se (<=3), A.2 spread \
             {spread:.2} (<=4), Richardson {richardson:.2e} (<1e-4), comparison holds incl. \
             orthant lhs {:.7} <= rhs {:.7}: {comparison_ok}",
            orthant.lhs, orthant.rhs
        ),
    ))
}

fn c8_first_hitting(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n = 20_000usize;
    let barrier = BarrierSpec::new(BarrierKind::Upper, 3, 0.5, 0.0)?;
    let report = first_hitting_histogram(&ctx.sim3, &barrier, n)?;
    let partition_exact = report.counts.iter().sum::<u64>() == report.crossed;
    let late = report.late_mass_fraction();
    let ok = partition_exact && late > 0.5;
    Ok(outcome(
        8,
        "first-hitting",
        ok,
        format!(
            "histogram {:?}, crossed {}/{}, partition exact: {partition_exact}, late-bin mass \
             {late:.3} (>0.5)",
            report.counts, report.crossed, n
        ),
    ))
}

fn c9_paley_zygmund(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n = 100_000usize;
    let mut ok = true;
    let mut detail = String::new();
    for &y in &[0.0, 1.0] {
        let barrier = BarrierSpec::new(BarrierKind::Lower, 3, 0.5, y)?;
        let report = count_exceedances(&ctx.sim3, 1.0, y, &barrier, n)?;
        let slack = 3.0 * report.pz_slack();
        let holds = report.pz_lower <= report.p_ge_1 + slack;
        ok &= holds;
        detail.push_str(&format!(
            "y={y}: pz {:.5} <= p(Z>=1) {:.5} + {slack:.5}: {holds}; ",
            report.pz_lower, report.p_ge_1
        ));
    }
    Ok(outcome(9, "paley-zygmund", ok, detail))
}

fn c10_good_event_moments(ctx: &DeskContext) -> Result<CriterionOutcome> {
    let n = 100_000usize;
    let cfg = &ctx.cfg3_hi_alpha;
    let beta = critical_beta(cfg.t, cfg.alpha)?;
    let a_list = [1.0, 2.0, 3.0, 4.0, 8.0];
    let report = moment_markov_curve(&ctx.sim3_hi_alpha, beta, &a_list, n)?;

    // P(E_A^c) ratio across A in {1,2,3} consistent with the tail shape
    // within a factor 2 per step: the Wilson interval of the empirical
    // ratio must intersect [shape/2, 2*shape].
    let mut shape_ok = true;
    let mut shape_detail = String::new();
    for step in 0..2 {
        let (a_lo, a_hi) = (a_list[step], a_list[step + 1]);
        let shape_ratio = predicted_right_tail(cfg.t, cfg.alpha, a_hi)?
            / predicted_right_tail(cfg.t, cfg.alpha, a_lo)?;
        let ci_lo = wilson_interval(report.e_ac_hits[step], n as u64, 0.95)?;
        let ci_hi = wilson_interval(report.e_ac_hits[step + 1], n as u64, 0.95)?;
        let ratio_lo = if ci_lo.hi > 0.0 { ci_hi.lo / ci_lo.hi } else { 0.0 };
        let ratio_hi = if ci_lo.lo > 0.0 { ci_hi.hi / ci_lo.lo } else { f64::INFINITY };
        let band = (shape_ratio / 2.0, shape_ratio * 2.0);
        let consistent = ratio_lo <= band.1 && band.0 <= ratio_hi;
        shape_ok &= consistent;
        shape_detail.push_str(&format!(
            "A {a_lo}->{a_hi}: hits {}->{}, ratio in [{ratio_lo:.3}, {ratio_hi:.3}] vs \
             [{:.4}, {:.4}]: {consistent}; ",
            report.e_ac_hits[step],
            report.e_ac_hits[step + 1],
            band.0,
            band.1
        ));
    }

    // A * P(Z_norm > A) stable within a factor 3 across A in {2,4,8}.
    let ap: Vec<f64> = [1usize, 3, 4].iter().map(|&i| report.a_times_p[i]).collect();
    let ap_max = ap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ap_min = ap.iter().cloned().fold(f64::INFINITY, f64::min);
    let ap_ok = ap_min > 0.0 && ap_max / ap_min <= 3.0;

    let ibp_ok = report.ibp_max_rel_err <= 0.01;

    let ok = shape_ok && ap_ok && ibp_ok;
    Ok(outcome(
        10,
        "good-event-moments",
        ok,
        format!(
            "{shape_detail}A*P(Z_norm>A) = {:?} spread {:.2} (<=3): {ap_ok}; ibp max rel err \
             {:.4} (<=0.01): {ibp_ok}",
            ap,
            ap_max / ap_min,
            report.ibp_max_rel_err
        ),
    ))
}

/// Run the full desk suite. Criteria 1..10 are evaluated in order; the
/// 11th is the wall-time budget of the experiment phase itself,
/// exclusive of the one-time sieve/covariance context build.
pub fn desk(seed: u64) -> Result<DeskReport> {
    desk_with_context(seed).map(|(report, _)| report)
}

/// Like [`desk`] but hands back the shared context for further
/// invariant checks on the same sieve and covariance rows.
pub fn desk_with_context(seed: u64) -> Result<(DeskReport, DeskContext)> {
    let cache_start = Instant::now();
    let ctx = build_ctx(seed)?;
    let cache_build_secs = cache_start.elapsed().as_secs_f64();

    let exp_start = Instant::now();
    let mut outcomes = vec![c1_bands_mertens(&ctx)];
    outcomes.push(c2_covariance_structure(&ctx)?);
    outcomes.push(c3_sampler_equivalence(&ctx)?);
    outcomes.push(c4_mgf_identity(&ctx)?);
    outcomes.push(c5_right_tail_slopes(&ctx)?);
    outcomes.push(c6_left_tail(&ctx)?);
    outcomes.push(c7_ballot_oracles(&ctx)?);
    outcomes.push(c8_first_hitting(&ctx)?);
    outcomes.push(c9_paley_zygmund(&ctx)?);
    outcomes.push(c10_good_event_moments(&ctx)?);
    let experiment_secs = exp_start.elapsed().as_secs_f64();

    let limit = runtime_allowance(45.0 * 60.0);
    outcomes.push(outcome(
        11,
        "desk-runtime",
        experiment_secs < limit,
        format!("experiments {experiment_secs:.0}s (limit {limit:.0}s, cache build excluded)"),
    ));

    Ok((
        DeskReport { outcomes, cache_build_secs, experiment_secs, cores: cores(), seed },
        ctx,
    ))
}

/// Covariance asymptotic-regime constants measured on a table:
/// `near` = max over positive grid lags dh < e^{-l} (all ranges k..=l)
/// of |cov - (l-k+1)/2| / (e^{2l} dh^2); `far` = max over lags
/// dh > e^{-k} of |cov| dh e^k. Measured once at t=3 and pinned in the
/// acceptance harness.
pub fn covariance_regime_constants(
    bands: &BandTable,
    config: &ModelConfig,
) -> Result<(f64, f64)> {
    let n = config.grid_len();
    let s = config.spacing();
    let mut near = 0.0f64;
    let mut far = 0.0f64;
    for k in 1..=bands.t {
        for l in k..=bands.t {
            for lag in 1..n {
                let dh = lag as f64 * s;
                let cov = covariance_exact(bands, k, l, dh)?;
                if dh < (-(l as f64)).exp() {
                    let center = (l - k + 1) as f64 / 2.0;
                    near = near.max((cov - center).abs() / ((2.0 * l as f64).exp() * dh * dh));
                } else if dh > (-(k as f64)).exp() {
                    far = far.max(cov.abs() * dh * (k as f64).exp());
                }
            }
        }
    }
    Ok((near, far))
}

/// A fast, non-normative pipeline check used by CLI tests and for quick
/// iteration: same machinery, small workloads, loose bounds.
pub fn smoke(seed: u64) -> Result<DeskReport> {
    let cache_start = Instant::now();
    let cfg2 = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime)?.with_seed(seed);
    let bands2 = Arc::new(sieve_bands(&cfg2)?);
    let covs2 = Arc::new(band_toeplitz_set(&bands2, &cfg2)?);
    let sim2 = Simulator::from_toeplitz(&cfg2, covs2);
    let cache_build_secs = cache_start.elapsed().as_secs_f64();

    let exp_start = Instant::now();
    let mut outcomes = Vec::new();

    let v1 = bands2.band(1).variance;
    outcomes.push(outcome(
        1,
        "smoke-bands",
        (v1 - 0.4220113).abs() <= 1e-6,
        format!("sigma1^2 = {v1:.7}"),
    ));

    let mut additivity = 0.0f64;
    for lag in 0..cfg2.grid_len() {
        let dh = lag as f64 * cfg2.spacing();
        let full = covariance_exact(&bands2, 1, 2, dh)?;
        let parts: f64 =
            (1..=2).map(|m| covariance_exact(&bands2, m, m, dh)).sum::<Result<f64>>()?;
        additivity = additivity.max((full - parts).abs());
    }
    outcomes.push(outcome(
        2,
        "smoke-covariance",
        additivity <= 1e-10,
        format!("band additivity worst {additivity:.2e}"),
    ));

    let report = estimate_right_tail(&sim2, &[0.0, 0.5, 1.0], 10_000)?;
    outcomes.push(outcome(
        3,
        "smoke-tail",
        report.p_hat.windows(2).all(|w| w[1] <= w[0]) && report.p_hat[0] > 0.0,
        format!("p_hat = {:?}", report.p_hat),
    ));

    let q1 = BallotQuery::new(vec![0.5], vec![1.0], 0.0, 0.5)?;
    let dp1 = ballot_dp(&q1, default_grid_step(), default_grid_extent(&q1))?;
    outcomes.push(outcome(
        4,
        "smoke-ballot",
        (dp1 - libm::erf(0.5)).abs() <= 1e-6,
        format!("dp {dp1:.7} vs erf(0.5) {:.7}", libm::erf(0.5)),
    ));

    let experiment_secs = exp_start.elapsed().as_secs_f64();
    Ok(DeskReport { outcomes, cache_build_secs, experiment_secs, cores: cores(), seed })
}
