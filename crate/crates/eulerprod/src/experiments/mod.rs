//! Monte Carlo experiments reproducing the model's probabilistic
//! claims: tails of the maximum, first-hitting decomposition, exceedance
//! counts with Paley-Zygmund bounds, pair correlations by branching
//! time, and the critical-moment machinery.
//!
//! Every report embeds the (seed, n, config) stamp that regenerates it.

mod counts;
mod hitting;
mod moments;
mod tail;

pub use counts::{count_exceedances, pair_correlation, CountReport, PairBin, PairCorrReport};
pub use hitting::{first_hitting_histogram, HittingReport};
pub use moments::{
    good_event_flag, high_point_measure, moment_integral, moment_markov_curve, MomentReport,
};
pub use tail::{estimate_left_tail, estimate_right_tail, small_interval_max_tail, TailReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, SamplingMode};
use crate::covariance::{band_toeplitz_set, ToeplitzCovariance};
use crate::error::Result;
use crate::primes::{build_bands, BandTable};
use crate::sampler::SampleEngine;

/// Provenance stamp carried by every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStamp {
    pub t: u32,
    pub alpha: f64,
    pub mode: SamplingMode,
    pub seed: u64,
    pub n: usize,
    pub engine: String,
}

impl RunStamp {
    pub fn new(config: &ModelConfig, n: usize, engine: &SampleEngine) -> Self {
        RunStamp {
            t: config.t,
            alpha: config.alpha,
            mode: config.mode,
            seed: config.seed,
            n,
            engine: engine.label().to_string(),
        }
    }
}

/// A config plus a ready sampling engine; experiments run against this.
pub struct Simulator {
    pub config: ModelConfig,
    pub engine: SampleEngine,
}

impl Simulator {
    /// Default engine for the config's mode: per-band Toeplitz factors
    /// for exact-prime tables, spectral synthesis for surrogate ones.
    pub fn from_table(config: &ModelConfig, bands: &BandTable) -> Result<Self> {
        let engine = match config.mode {
            SamplingMode::ExactPrime => {
                let covs = band_toeplitz_set(bands, config)?;
                SampleEngine::toeplitz(Arc::new(covs))
            }
            SamplingMode::Surrogate => SampleEngine::spectral(bands, config)?,
        };
        Ok(Simulator { config: config.clone(), engine })
    }

    /// Build bands (sieve or synthesize) and then the default engine.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        let bands = build_bands(config)?;
        Simulator::from_table(config, &bands)
    }

    pub fn with_engine(config: &ModelConfig, engine: SampleEngine) -> Self {
        Simulator { config: config.clone(), engine }
    }

    /// Reuse prebuilt Toeplitz rows (e.g. from the covariance cache).
    pub fn from_toeplitz(config: &ModelConfig, covs: Arc<Vec<ToeplitzCovariance>>) -> Self {
        Simulator { config: config.clone(), engine: SampleEngine::toeplitz(covs) }
    }
}
