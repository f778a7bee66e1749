//! Scale parameters of the model and the simulation grid.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `t` for which exact prime sieving is the default
/// (`exp(exp(3)) ~ 5.28e8` keeps the sieve and prime storage in desk
/// memory; beyond that the surrogate takes over).
pub const EXACT_MODE_CAP: u32 = 3;

/// Largest `t` accepted in surrogate mode; the grid grows like
/// `e^{t + t^{1-alpha}}` and becomes unwieldy past this.
pub const SURROGATE_T_CAP: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    ExactPrime,
    Surrogate,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingMode::ExactPrime => write!(f, "exact-prime"),
            SamplingMode::Surrogate => write!(f, "surrogate"),
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-prime" | "exact" => Ok(SamplingMode::ExactPrime),
            "surrogate" => Ok(SamplingMode::Surrogate),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected exact-prime or surrogate)"
            ))),
        }
    }
}

/// All scale parameters. `t` plays the role of `log log T`; the interval
/// half-width `e^{t*theta}` and grid spacing `e^{-t}` are derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub t: u32,
    pub alpha: f64,
    pub mode: SamplingMode,
    pub seed: u64,
    pub n_samples: usize,
    pub exact_mode_cap: u32,
    theta: f64,
    half_width: f64,
    spacing: f64,
}

impl ModelConfig {
    pub fn new(t: u32, alpha: f64, mode: SamplingMode) -> Result<Self> {
        if t == 0 {
            return Err(Error::Config("t must be a positive integer".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie strictly in (0, 1), got {alpha}"
            )));
        }
        let cfg = ModelConfig {
            t,
            alpha,
            mode,
            seed: 42,
            n_samples: 10_000,
            exact_mode_cap: EXACT_MODE_CAP,
            theta: (t as f64).powf(-alpha),
            half_width: ((t as f64) * (t as f64).powf(-alpha)).exp(),
            spacing: (-(t as f64)).exp(),
        };
        cfg.check_mode_caps()?;
        Ok(cfg)
    }

    fn check_mode_caps(&self) -> Result<()> {
        match self.mode {
            SamplingMode::ExactPrime => {
                if self.t > self.exact_mode_cap {
                    return Err(Error::LimitExceeded { t: self.t, cap: self.exact_mode_cap });
                }
            }
            SamplingMode::Surrogate => {
                if self.t > SURROGATE_T_CAP {
                    return Err(Error::Config(format!(
                        "surrogate mode supports t <= {SURROGATE_T_CAP}, got {}",
                        self.t
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    /// `theta = t^{-alpha}`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Interval half-width `e^{t*theta}`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Grid spacing `e^{-t}`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of grid points `2*floor(half_width/spacing) + 1` (odd,
    /// symmetric about 0).
    pub fn grid_len(&self) -> usize {
        2 * (self.half_width / self.spacing).floor() as usize + 1
    }

    /// Sieve limit `floor(exp(exp(t)))` for exact-prime mode.
    pub fn sieve_limit(&self) -> Result<u64> {
        let e_t = (self.t as f64).exp();
        if e_t >= (u64::MAX as f64).ln() {
            return Err(Error::Overflow { t: self.t });
        }
        Ok(e_t.exp().floor() as u64)
    }
}

/// Parse a plain-text `key = value` config file. Unknown keys are
/// rejected with their line number; missing keys fall back to defaults
/// (t=3, alpha=0.5, exact-prime, seed=42, n_samples=10000).
pub fn validate_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut t: u32 = 3;
    let mut alpha: f64 = 0.5;
    let mut mode = SamplingMode::ExactPrime;
    let mut seed: u64 = 42;
    let mut n_samples: usize = 10_000;
    let mut cap: Option<u32> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let ctx = |what: &str| Error::Config(format!("line {}: key '{key}': {what}", lineno + 1));
        match key {
            "t" => {
                // Non-integer t is rejected here rather than silently rounded.
                t = value.parse::<u32>().map_err(|_| ctx("t must be a positive integer"))?;
            }
            "alpha" => {
                alpha = value.parse::<f64>().map_err(|_| ctx("alpha must be a real number"))?;
            }
            "mode" => mode = value.parse()?,
            "seed" => seed = value.parse::<u64>().map_err(|_| ctx("seed must be a u64"))?,
            "n_samples" => {
                n_samples =
                    value.parse::<usize>().map_err(|_| ctx("n_samples must be an integer"))?;
            }
            "exact_mode_cap" => {
                cap = Some(value.parse::<u32>().map_err(|_| ctx("cap must be an integer"))?);
            }
            other => {
                return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1)));
            }
        }
    }

    let mut cfg = ModelConfig::new(t, alpha, mode)?.with_seed(seed).with_samples(n_samples);
    if let Some(cap) = cap {
        cfg.exact_mode_cap = cap;
        cfg.check_mode_caps()?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities_match_definitions() {
        let cfg = ModelConfig::new(3, 0.5, SamplingMode::ExactPrime).unwrap();
        assert_eq!(cfg.theta(), 3f64.powf(-0.5));
        assert_eq!(cfg.half_width(), (3.0 * 3f64.powf(-0.5)).exp());
        assert_eq!(cfg.spacing(), (-3f64).exp());
        // half_width e^{1.7320508} = 5.65223..., spacing e^{-3} = 0.0497871...
        assert!((cfg.half_width() - 5.6522337).abs() < 1e-6);
        assert!((cfg.spacing() - 0.0497871).abs() < 1e-7);
        assert_eq!(cfg.grid_len(), 227);
    }

    #[test]
    fn grid_len_is_odd() {
        for t in 1..=6 {
            for &alpha in &[0.25, 0.5, 0.75] {
                let cfg = ModelConfig::new(t, alpha, SamplingMode::Surrogate).unwrap();
                assert_eq!(cfg.grid_len() % 2, 1);
            }
        }
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        assert!(ModelConfig::new(3, 1.5, SamplingMode::ExactPrime).is_err());
        assert!(ModelConfig::new(3, 0.0, SamplingMode::ExactPrime).is_err());
        assert!(ModelConfig::new(3, 1.0, SamplingMode::ExactPrime).is_err());
    }

    #[test]
    fn exact_mode_cap_enforced() {
        let err = ModelConfig::new(4, 0.5, SamplingMode::ExactPrime).unwrap_err();
        assert!(matches!(err, Error::LimitExceeded { t: 4, cap: 3 }));
        assert!(ModelConfig::new(8, 0.5, SamplingMode::Surrogate).is_ok());
    }

    #[test]
    fn sieve_limit_t3() {
        let cfg = ModelConfig::new(3, 0.5, SamplingMode::ExactPrime).unwrap();
        let limit = cfg.sieve_limit().unwrap();
        // e^{e^3} = 5.2849131...e8
        assert_eq!(limit, 528_491_311);
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = std::env::temp_dir().join("eulerprod-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.conf");
        std::fs::write(&path, "t = 3\nalpha = 0.5\nmode = exact-prime\n# comment\nseed = 7\n")
            .unwrap();
        let cfg = validate_config(&path).unwrap();
        assert_eq!(cfg.t, 3);
        assert_eq!(cfg.seed, 7);
        assert!((cfg.spacing() - 0.0497871).abs() < 1e-7);
        assert!((cfg.half_width() - 5.6522337).abs() < 1e-7);

        std::fs::write(&path, "t = 3.5\n").unwrap();
        assert!(validate_config(&path).is_err(), "non-integer t must be rejected");
        std::fs::write(&path, "alpha = 1.5\n").unwrap();
        assert!(validate_config(&path).is_err(), "alpha outside (0,1) must be rejected");
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(validate_config(&path).is_err());
    }
}
