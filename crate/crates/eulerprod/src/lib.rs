//! Simulation library for the random Euler-product model of the zeta
//! modulus on short intervals of the critical line.
//!
//! The field `S_t(h) = sum_m Y_m(h)` is a centered Gaussian built from
//! prime frequencies split into multiscale bands `e^{m-1} < log p <= e^m`.
//! The library sieves those bands exactly for small `t`, replaces them by
//! a prime-number-theorem surrogate for larger `t`, samples the field on
//! a discrete grid (exactly in distribution, via per-band Toeplitz
//! factorizations or spectral synthesis), and runs the Monte Carlo
//! experiments that probe tails of the maximum, barrier first hittings,
//! exceedance counts, and critical moments.

pub mod ballot;
pub mod cache;
pub mod config;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod predict;
pub mod primes;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod suite;

pub use config::{ModelConfig, SamplingMode};
pub use error::{Error, Result};
pub use primes::{Band, BandTable};
