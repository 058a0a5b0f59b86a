//! Scalar training reward over an object set and the grasp-success predicate.

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

/// Raw result of one design-on-one-object rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    /// Object end-pose displacement relative to the wrist (m), `[x, y]`.
    pub dq: [f64; 2],
    /// Vertical component of `dq`, positive up (m).
    pub dq_y: f64,
    pub ground_collision: bool,
    pub design_valid: bool,
    pub contact_at_end: bool,
    pub force_feedback_nonzero: bool,
    pub lifted: bool,
}

impl EvalOutcome {
    /// Outcome for a design that was rejected without simulating.
    pub fn invalid_design() -> Self {
        EvalOutcome {
            dq: [0.0, 0.0],
            dq_y: 0.0,
            ground_collision: false,
            design_valid: false,
            contact_at_end: false,
            force_feedback_nonzero: false,
            lifted: false,
        }
    }

    pub fn dq_norm(&self) -> f64 {
        math::hypot(self.dq[0], self.dq[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    /// Returned for any design with a ground collision.
    #[serde(default)]
    pub collision_reward: f64,
    /// Added to every reward that is not zeroed.
    #[serde(default)]
    pub offset: f64,
    /// When false, collisions enter the sum as a `-I` penalty per object
    /// instead of zeroing the reward.
    #[serde(default = "yes")]
    pub zero_on_collision: bool,
}

fn yes() -> bool {
    true
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { w1: -1.0, w2: -1.0, collision_reward: 0.0, offset: 0.0, zero_on_collision: true }
    }
}

impl RewardWeights {
    /// Collisions cost `-1` per object instead of zeroing, and an offset of
    /// `1.25` per object keeps valid designs above the invalid score of 0.
    /// Zeroing makes invalid and colliding designs outrank every valid one
    /// once rewards are negative, which a search cannot climb out of.
    pub fn collision_penalized(objects: usize) -> Self {
        RewardWeights { offset: 1.25 * objects as f64, zero_on_collision: false, ..RewardWeights::default() }
    }

    pub fn check(&self) -> Result<()> {
        if [self.w1, self.w2, self.collision_reward, self.offset].iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("weights", "must be finite"))
        }
    }
}

/// Reward of one design over an object set.
///
/// Invalid designs score 0. With collision zeroing on, any collision returns
/// `collision_reward`; otherwise the reward is
/// `w1 sum |dq| + w2 sum |min(dq_y, 0)| - sum I + offset`.
pub fn design_reward(outcomes: &[EvalOutcome], weights: &RewardWeights) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::invalid("empty outcome list"));
    }
    if outcomes.iter().any(|o| !o.design_valid) {
        return Ok(0.0);
    }
    let collisions = outcomes.iter().filter(|o| o.ground_collision).count();
    if weights.zero_on_collision && collisions > 0 {
        return Ok(weights.collision_reward);
    }
    let slip: f64 = outcomes.iter().map(EvalOutcome::dq_norm).sum();
    let sag: f64 = outcomes.iter().map(|o| o.dq_y.min(0.0).abs()).sum();
    let r = weights.w1 * slip + weights.w2 * sag - collisions as f64 + weights.offset;
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite("design reward".into()))
    }
}

/// `lifted && !ground_collision && contact_at_end && force_feedback_nonzero`.
pub fn grasp_success(outcome: &EvalOutcome) -> bool {
    outcome.lifted && !outcome.ground_collision && outcome.contact_at_end && outcome.force_feedback_nonzero
}

/// Final height at or above half the commanded lift counts as lifted.
pub fn is_lifted(final_height: f64, lift_height: f64) -> bool {
    lift_height > 0.0 && final_height >= 0.5 * lift_height
}
