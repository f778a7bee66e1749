//! Seeded property sweeps over the public surface: covariance algebra,
//! grid structure, DP oracle ranges, and barrier ordering.

use eulerprod::ballot::{ballot_dp, default_grid_extent, default_grid_step, BallotQuery};
use eulerprod::config::{ModelConfig, SamplingMode};
use eulerprod::covariance::covariance_exact;
use eulerprod::predict::{threshold_log_max, slope_mu};
use eulerprod::primes::sieve_bands;
use eulerprod::sampler::grid;
use eulerprod::stats::stream;
use rand::RngExt;

#[test]
fn covariance_algebra_random_lags() {
    let cfg = ModelConfig::new(2, 0.5, SamplingMode::ExactPrime).unwrap();
    let table = sieve_bands(&cfg).unwrap();
    let v0 = covariance_exact(&table, 1, 2, 0.0).unwrap();
    let mut rng = stream(11, "prop-cov", 0);
    for _ in 0..200 {
        let dh: f64 = rng.random_range(-12.0..12.0);
        let full = covariance_exact(&table, 1, 2, dh).unwrap();
        // Evenness.
        assert_eq!(full, covariance_exact(&table, 1, 2, -dh).unwrap());
        // Band additivity.
        let parts = covariance_exact(&table, 1, 1, dh).unwrap()
            + covariance_exact(&table, 2, 2, dh).unwrap();
        assert!((full - parts).abs() < 1e-12);
        // Termwise bound.
        assert!(full.abs() <= v0 + 1e-12);
    }
}

#[test]
fn grid_structure_over_configs() {
    let mut rng = stream(13, "prop-grid", 0);
    for _ in 0..50 {
        let t = rng.random_range(1..=6u32);
        let alpha = rng.random_range(0.05..0.95);
        let cfg = ModelConfig::new(t, alpha, SamplingMode::Surrogate).unwrap();
        let g = grid(&cfg);
        assert_eq!(g.len() % 2, 1);
        assert_eq!(g.len(), cfg.grid_len());
        assert_eq!(g[g.len() / 2], 0.0);
        let last = *g.last().unwrap();
        assert!(last <= cfg.half_width());
        assert!(last + cfg.spacing() > cfg.half_width());
        assert_eq!(g[0], -last);
    }
}

#[test]
fn threshold_identity_random_sweep() {
    let mut rng = stream(17, "prop-threshold", 0);
    for _ in 0..200 {
        let t = rng.random_range(2..=40u32);
        let alpha = rng.random_range(0.05..0.95);
        let y = rng.random_range(-5.0..5.0);
        let th = threshold_log_max(t, alpha, y).unwrap();
        let mu = slope_mu(t, alpha).unwrap();
        assert!((th - (mu * t as f64 + y)).abs() < 1e-10);
    }
}

#[test]
fn ballot_dp_stays_in_unit_interval() {
    let mut rng = stream(19, "prop-ballot", 0);
    for _ in 0..20 {
        let j = rng.random_range(1..=6usize);
        let barrier: Vec<f64> = (0..j).map(|_| rng.random_range(-0.5..4.0)).collect();
        let x: f64 = rng.random_range(-2.0..2.0);
        let delta = rng.random_range(0.1..1.0);
        let q = BallotQuery::new(vec![0.5; j], barrier, x, delta).unwrap();
        let p = ballot_dp(&q, default_grid_step(), default_grid_extent(&q)).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&p), "p = {p}");
        // Raising every barrier value can only increase the probability.
        // Two independently discretized evaluations can cross by the
        // local truncation error when a barrier cuts dense regions, so a
        // violation must shrink away under grid refinement.
        let mut loose = q.clone();
        for b in loose.barrier.iter_mut() {
            *b += 0.7;
        }
        let p_loose =
            ballot_dp(&loose, default_grid_step(), default_grid_extent(&loose)).unwrap();
        if p_loose < p - 1e-12 {
            assert!(p - p_loose < 1e-3, "violation {:.3e} too large", p - p_loose);
            let step = default_grid_step() / 2.0;
            let p_fine = ballot_dp(&q, step, default_grid_extent(&q)).unwrap();
            let p_loose_fine = ballot_dp(&loose, step, default_grid_extent(&loose)).unwrap();
            assert!(
                p_fine - p_loose_fine < (p - p_loose) / 2.0,
                "violation does not shrink under refinement: {:.3e} -> {:.3e}",
                p - p_loose,
                p_fine - p_loose_fine
            );
        }
    }
}
