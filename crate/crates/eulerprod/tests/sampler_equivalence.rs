//! Cross-sampler law equivalence on a shared surrogate table: the
//! direct cosine sum, the per-band Toeplitz factorization, and the FFT
//! synthesis must produce statistically indistinguishable fields.

use std::sync::Arc;

use eulerprod::config::{ModelConfig, SamplingMode};
use eulerprod::covariance::band_toeplitz_set;
use eulerprod::primes::surrogate_bands;
use eulerprod::sampler::{FieldSample, SampleEngine};
use eulerprod::stats::{bootstrap_quantile, mean, variance};

fn engines_t4(seed: u64) -> (ModelConfig, Vec<(&'static str, SampleEngine)>) {
    let cfg = ModelConfig::new(4, 0.5, SamplingMode::Surrogate).unwrap().with_seed(seed);
    let bands = Arc::new(surrogate_bands(&cfg).unwrap());
    let covs = Arc::new(band_toeplitz_set(&bands, &cfg).unwrap());
    let spectral = SampleEngine::spectral(&bands, &cfg).unwrap();
    (
        cfg,
        vec![
            ("direct", SampleEngine::direct(bands)),
            ("toeplitz", SampleEngine::toeplitz(covs)),
            ("spectral", spectral),
        ],
    )
}

#[test]
fn three_samplers_share_center_variance() {
    let (cfg, engines) = engines_t4(1001);
    let n = 3000usize;
    let mid = cfg.grid_len() / 2;
    let want = 2.0; // four surrogate bands of variance 1/2 each
    for (i, (name, engine)) in engines.iter().enumerate() {
        let cfg_i = cfg.clone().with_seed(cfg.seed + i as u64);
        let vals = engine
            .map_fields(&cfg_i, n, &|_, s: &FieldSample| s.total()[mid])
            .unwrap();
        let v = variance(&vals);
        let se = want * (2.0 / n as f64).sqrt();
        assert!((v - want).abs() < 4.0 * se, "{name}: var {v} vs {want}");
        let m = mean(&vals);
        assert!(m.abs() < 4.0 * (want / n as f64).sqrt(), "{name}: mean {m}");
    }
}

#[test]
fn three_samplers_share_max_distribution() {
    let (cfg, engines) = engines_t4(2002);
    let n = 2000usize;
    let mut quantile_cis = Vec::new();
    for (i, (name, engine)) in engines.iter().enumerate() {
        let cfg_i = cfg.clone().with_seed(cfg.seed + 17 * i as u64);
        let maxima = engine.map_total_max(&cfg_i, n).unwrap();
        let cis: Vec<_> = [0.5, 0.9]
            .iter()
            .map(|&q| bootstrap_quantile(&maxima, q, 400, 7 + i as u64).unwrap())
            .collect();
        quantile_cis.push((*name, cis));
    }
    for qi in 0..2 {
        for a in 0..quantile_cis.len() {
            for b in a + 1..quantile_cis.len() {
                let (na, ca) = &quantile_cis[a];
                let (nb, cb) = &quantile_cis[b];
                assert!(
                    ca[qi].overlaps(&cb[qi]),
                    "{na} vs {nb} quantile {qi}: [{}, {}] vs [{}, {}]",
                    ca[qi].lo,
                    ca[qi].hi,
                    cb[qi].lo,
                    cb[qi].hi
                );
            }
        }
    }
}

#[test]
fn engines_are_deterministic_per_seed_and_index() {
    let (cfg, engines) = engines_t4(3003);
    for (name, engine) in &engines {
        let a = engine.sample_field(&cfg, 7).unwrap();
        let b = engine.sample_field(&cfg, 7).unwrap();
        assert_eq!(a.increments, b.increments, "{name} not deterministic");
        let c = engine.sample_field(&cfg, 8).unwrap();
        assert_ne!(a.increments, c.increments, "{name} ignores the index");
    }
}
