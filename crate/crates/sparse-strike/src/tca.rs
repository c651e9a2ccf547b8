//! Tactically-chanced attack gate: normalized Shannon entropy of the
//! action distribution decides, per frame, whether the attacker strikes.
//!
//! Natural log throughout; the base cancels in the ratio. The convention
//! `0 * log 0 = 0` makes one-hot distributions score 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ActionDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcaConfig {
    /// Threshold zeta*: attack iff uncertainty < zeta* (strict).
    pub threshold: f64,
}

impl TcaConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "TCA threshold must be in [0, 1], got {threshold}"
            )));
        }
        Ok(Self { threshold })
    }
}

/// Normalized Shannon entropy of a distribution, in [0, 1].
pub fn attack_uncertainty(dist: &ActionDistribution) -> Result<f64> {
    let probs = dist.probs();
    let m = probs.len();
    if m < 2 {
        return Err(Error::Config(
            "attack uncertainty needs m >= 2 (log m = 0 otherwise)".into(),
        ));
    }
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    let zeta = h / (m as f64).ln();
    // clamp rounding noise at the edges
    Ok(zeta.clamp(0.0, 1.0))
}

/// Attack decision: strictly below threshold.
pub fn should_attack(zeta: f64, config: &TcaConfig) -> bool {
    zeta < config.threshold
}

/// Mean attack uncertainty over an unattacked recorded rollout; the
/// threshold-setting protocol used by the FSA-size sweep.
pub fn mean_uncertainty_threshold(trajectory: &[ActionDistribution]) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::Input(
            "cannot take mean uncertainty of an empty trajectory".into(),
        ));
    }
    let mut sum = 0.0;
    for dist in trajectory {
        sum += attack_uncertainty(dist)?;
    }
    Ok(sum / trajectory.len() as f64)
}
