use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("band range {k}..{l} invalid for t={t}")]
    BandRange { k: u32, l: u32, t: u32 },

    #[error("exact-prime mode is limited to t <= {cap} (got t = {t}); use surrogate mode")]
    LimitExceeded { t: u32, cap: u32 },

    #[error("sieve limit exp(exp({t})) exceeds the 64-bit integer range")]
    Overflow { t: u32 },

    #[error(
        "covariance matrix not positive definite even after jitter {jitter:.3e} \
         (worst pivot {pivot:.3e} at index {index}; pivot estimates the most negative eigenvalue)"
    )]
    NotPositiveDefinite { pivot: f64, index: usize, jitter: f64 },

    #[error("no factorization available for band {m}")]
    FactorizationMissing { m: u32 },

    #[error("dp resolution: {0}")]
    Resolution(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("rank-deficient least-squares system")]
    RankDeficient,

    #[error("quadrature failed to reach tolerance: {0}")]
    Quadrature(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit-code class used by the CLI: 2 config, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::BandRange { .. }
            | Error::LimitExceeded { .. }
            | Error::Domain(_)
            | Error::Hypothesis(_) => 2,
            _ => 3,
        }
    }
}
