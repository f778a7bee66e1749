//! Closed-form deterministic quantities: the slope mu, the logarithmic
//! bump, the three barrier variants, tail thresholds, predicted tail
//! shapes, and the critical moment exponent.
//!
//! Tail shapes are correct up to an absolute constant; experiments only
//! ever compare ratios and slopes against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_t_alpha(t: u32, alpha: f64) -> Result<()> {
    if t < 2 {
        return Err(Error::Domain(format!("t >= 2 required, got {t}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha in (0,1) required, got {alpha}")));
    }
    Ok(())
}

/// mu = sqrt(1+theta) - (1+2 alpha) / (4 sqrt(1+theta)) * log t / t,
/// with theta = t^{-alpha}.
pub fn slope_mu(t: u32, alpha: f64) -> Result<f64> {
    check_t_alpha(t, alpha)?;
    let tf = t as f64;
    let theta = tf.powf(-alpha);
    let root = (1.0 + theta).sqrt();
    Ok(root - (1.0 + 2.0 * alpha) / (4.0 * root) * tf.ln() / tf)
}

/// Logarithmic bump: 0 at k in {0, t}, log(min(k, t-k)) in between.
pub fn bump_psi(k: u32, t: u32) -> Result<f64> {
    if k > t {
        return Err(Error::Domain(format!("bump_psi: k={k} out of 0..={t}")));
    }
    if k == 0 || k == t {
        Ok(0.0)
    } else {
        Ok((k.min(t - k) as f64).ln())
    }
}

/// Log-scale threshold for the maximum:
/// sqrt(1+theta) t - (1+2 alpha)/(4 sqrt(1+theta)) log t + y = mu t + y.
pub fn threshold_log_max(t: u32, alpha: f64, y: f64) -> Result<f64> {
    check_t_alpha(t, alpha)?;
    let tf = t as f64;
    let theta = tf.powf(-alpha);
    let root = (1.0 + theta).sqrt();
    Ok(root * tf - (1.0 + 2.0 * alpha) / (4.0 * root) * tf.ln() + y)
}

/// Right-tail shape (1 + y/t^{1-alpha}) e^{-2 sqrt(1+theta) y} e^{-y^2/t},
/// defined for y >= 0, correct up to a constant.
pub fn predicted_right_tail(t: u32, alpha: f64, y: f64) -> Result<f64> {
    check_t_alpha(t, alpha)?;
    if y < 0.0 {
        return Err(Error::Domain(format!(
            "predicted_right_tail needs y >= 0 (got {y}); the left tail is a different shape"
        )));
    }
    let tf = t as f64;
    let theta = tf.powf(-alpha);
    Ok((1.0 + y / tf.powf(1.0 - alpha))
        * (-2.0 * (1.0 + theta).sqrt() * y).exp()
        * (-y * y / tf).exp())
}

/// Left-tail deficiency envelope e^{2 sqrt(1+theta) y} / (1 - y), y < 0.
pub fn predicted_left_tail(t: u32, alpha: f64, y: f64) -> Result<f64> {
    check_t_alpha(t, alpha)?;
    if y >= 0.0 {
        return Err(Error::Domain(format!("predicted_left_tail needs y < 0, got {y}")));
    }
    let theta = (t as f64).powf(-alpha);
    Ok((2.0 * (1.0 + theta).sqrt() * y).exp() / (1.0 - y))
}

/// Critical moment exponent beta_c = 2 sqrt(1 + theta).
pub fn critical_beta(t: u32, alpha: f64) -> Result<f64> {
    check_t_alpha(t, alpha)?;
    Ok(2.0 * (1.0 + (t as f64).powf(-alpha)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    /// First-hitting barrier mu k + y + (1-k/t) t^{1-alpha}
    /// + (11/(4 alpha)) psi(k) + 1.
    Upper,
    /// Exceedance-count barrier mu k + (1-k/t) t^{1-alpha} + y + 1.
    Lower,
    /// Good-event barrier: the lower barrier with y replaced by A.
    GoodEvent,
}

/// A barrier evaluable at integer scales k in [0, t]. `offset` is y for
/// upper/lower barriers and A for the good event.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub t: u32,
    pub alpha: f64,
    pub offset: f64,
    pub mu: f64,
}

impl BarrierSpec {
    pub fn new(kind: BarrierKind, t: u32, alpha: f64, offset: f64) -> Result<Self> {
        let mu = slope_mu(t, alpha)?;
        Ok(BarrierSpec { kind, t, alpha, offset, mu })
    }

    /// Barrier value at integer scale k; barriers are only ever used at
    /// integer scales, so no interpolation is offered.
    pub fn value(&self, k: u32) -> Result<f64> {
        if k > self.t {
            return Err(Error::Domain(format!("barrier: k={k} out of 0..={}", self.t)));
        }
        let tf = self.t as f64;
        let kf = k as f64;
        let decay = (1.0 - kf / tf) * tf.powf(1.0 - self.alpha);
        match self.kind {
            BarrierKind::Upper => Ok(self.mu * kf
                + self.offset
                + decay
                + 11.0 / (4.0 * self.alpha) * bump_psi(k, self.t)?
                + 1.0),
            BarrierKind::Lower | BarrierKind::GoodEvent => {
                Ok(self.mu * kf + decay + self.offset + 1.0)
            }
        }
    }
}
