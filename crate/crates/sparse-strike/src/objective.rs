//! Fitness of a candidate adversary: best non-original action probability
//! minus the original action's probability under perturbation. A positive
//! value certifies that the greedy action changed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::{self, AdversaryGenome, FsaConfig};
use crate::policy::{greedy_action, ActionDistribution, PolicySession};
use crate::state::FrameState;

/// Result of scoring one candidate adversary on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub discrepancy: f64,
    pub original_action: usize,
    pub perturbed_action: usize,
    pub success: bool,
}

impl AttackOutcome {
    /// `success` is exactly `discrepancy > 0`; a positive discrepancy
    /// certifies the action flip, asserted here on every construction.
    pub fn new(perturbed: &ActionDistribution, original_action: usize) -> Result<Self> {
        let d = discrepancy(perturbed, original_action)?;
        let p = greedy_action(perturbed);
        let success = d > 0.0;
        assert!(
            !success || p != original_action,
            "positive discrepancy must change the greedy action (d={d}, o={original_action}, p={p})"
        );
        Ok(Self {
            discrepancy: d,
            original_action,
            perturbed_action: p,
            success,
        })
    }
}

/// `max_{j != o} probs[j] - probs[o]`, bounded in [-1, 1].
///
/// An exact tie (`discrepancy == 0`) counts as unsuccessful: with
/// low-index tie-breaking the greedy action can stay at `o`.
pub fn discrepancy(perturbed: &ActionDistribution, original_action: usize) -> Result<f64> {
    let probs = perturbed.probs();
    if probs.len() < 2 {
        return Err(Error::Config("discrepancy needs m >= 2 actions".into()));
    }
    if original_action >= probs.len() {
        return Err(Error::Bounds {
            axis: "action",
            index: original_action,
            size: probs.len(),
        });
    }
    let best_other = probs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != original_action)
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best_other - probs[original_action])
}

/// Scores one genome: exactly one oracle query on the perturbed state.
///
/// The original action `o` is computed once per frame outside the GA loop
/// and reused, so a frame's total budget is 1 + (GA evaluations).
pub fn evaluate(
    session: &PolicySession<'_>,
    state: &FrameState,
    genome: &AdversaryGenome,
    original_action: usize,
    config: &FsaConfig,
) -> Result<AttackOutcome> {
    let perturbed = perturb::apply(state, genome, config)?;
    let dist = session.query(&perturbed)?;
    AttackOutcome::new(&dist, original_action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{Gene, TargetChannels};
    use crate::policy::{Activation, Head, LayerSpec, PolicySpec};
    use crate::state::StateShape;

    fn dist(p: &[f64]) -> ActionDistribution {
        ActionDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn direct_discrepancy_values() {
        assert!((discrepancy(&dist(&[0.4, 0.6]), 0).unwrap() - 0.2).abs() < 1e-12);
        assert!((discrepancy(&dist(&[0.5, 0.3, 0.2]), 0).unwrap() + 0.2).abs() < 1e-12);
        for m in 2..6 {
            let u = vec![1.0 / m as f64; m];
            for o in 0..m {
                assert!(discrepancy(&dist(&u), o).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn action_index_out_of_range() {
        assert!(matches!(
            discrepancy(&dist(&[0.5, 0.5]), 2),
            Err(Error::Bounds { axis: "action", .. })
        ));
    }

    /// Linear policy where pixel (0,0) has weight +10 toward action 1;
    /// verified by direct forward pass before the main build.
    fn single_pixel_vulnerable() -> PolicySpec {
        let shape = StateShape::new(4, 4, 1).unwrap();
        let mut weights = vec![0.0; 2 * 16];
        weights[16] = 10.0; // action 1, pixel (0,0)
        PolicySpec {
            input_shape: shape,
            action_count: 2,
            head: Head::Probabilities,
            temperature: 1.0,
            layers: vec![LayerSpec::Dense {
                out_features: 2,
                weights,
                bias: vec![0.0, 0.0],
                activation: Activation::Linear,
            }],
        }
    }

    #[test]
    fn zero_genome_cannot_flip_strict_argmax() {
        let policy = single_pixel_vulnerable();
        let session = PolicySession::new(&policy);
        let state = FrameState::zeros(policy.input_shape);
        let o = greedy_action(&session.query(&state).unwrap());
        let cfg = FsaConfig::new(1, TargetChannels::NewestOnly).unwrap();
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 2, y: 2, p: 0 }],
        };
        let out = evaluate(&session, &state, &genome, o, &cfg).unwrap();
        assert!(!out.success);
        assert_eq!(out.perturbed_action, o);
    }

    #[test]
    fn constructed_policy_flips_on_hot_pixel() {
        let policy = single_pixel_vulnerable();
        let session = PolicySession::new(&policy);
        let state = FrameState::zeros(policy.input_shape);
        let o = greedy_action(&session.query(&state).unwrap());
        assert_eq!(o, 0); // uniform logits, tie broken low
        let cfg = FsaConfig::new(1, TargetChannels::NewestOnly).unwrap();
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 0, y: 0, p: 255 }],
        };
        let before = session.query_count();
        let out = evaluate(&session, &state, &genome, o, &cfg).unwrap();
        assert_eq!(session.query_count(), before + 1);
        assert!(out.success);
        assert!(out.discrepancy > 0.0);
        assert_eq!(out.perturbed_action, 1);
    }

    #[test]
    fn discrepancy_bounded() {
        assert!(discrepancy(&dist(&[1.0, 0.0]), 0).unwrap() >= -1.0);
        assert!(discrepancy(&dist(&[0.0, 1.0]), 0).unwrap() <= 1.0);
    }
}
