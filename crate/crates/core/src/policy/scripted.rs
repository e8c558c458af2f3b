//! Hand-written stand-ins for trained navigation policies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ObservationVector;
use crate::dynamics::ReferenceCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedKind {
    GoalSeeker,
    NoisyGoalSeeker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalSeekerParams {
    pub v_max: f64,
    pub w_max: f64,
    /// Proportional heading gain, 1/s.
    pub heading_gain: f64,
    pub noise_v: f64,
    pub noise_w: f64,
}

impl Default for GoalSeekerParams {
    fn default() -> Self {
        Self { v_max: 0.5, w_max: 1.5, heading_gain: 2.0, noise_v: 0.05, noise_w: 0.3 }
    }
}

/// Proportional heading controller toward the target. Surge speed falls off
/// with the cosine of the heading error so the agent turns in place when the
/// target is behind it.
pub fn goal_seeker(obs: &ObservationVector, p: &GoalSeekerParams) -> ReferenceCommand {
    let err = obs.target_heading;
    let w3 = (p.heading_gain * err).clamp(-p.w_max, p.w_max);
    let v1 = p.v_max * err.cos().max(0.0);
    ReferenceCommand { v1, w3 }
}

/// Goal seeker with seeded Gaussian perturbations on both outputs.
pub fn scripted_policy(
    obs: &ObservationVector,
    kind: ScriptedKind,
    p: &GoalSeekerParams,
    rng: &mut impl Rng,
) -> ReferenceCommand {
    let base = goal_seeker(obs, p);
    match kind {
        ScriptedKind::GoalSeeker => base,
        ScriptedKind::NoisyGoalSeeker => {
            let dv = Normal::new(0.0, p.noise_v.max(0.0)).map_or(0.0, |n| n.sample(rng));
            let dw = Normal::new(0.0, p.noise_w.max(0.0)).map_or(0.0, |n| n.sample(rng));
            ReferenceCommand {
                v1: (base.v1 + dv).clamp(0.0, p.v_max),
                w3: (base.w3 + dw).clamp(-p.w_max, p.w_max),
            }
        }
    }
}

/// Owned scripted policy with its own random stream.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub kind: ScriptedKind,
    pub params: GoalSeekerParams,
    rng: ChaCha8Rng,
}

impl ScriptedPolicy {
    pub fn new(kind: ScriptedKind, params: GoalSeekerParams, rng: ChaCha8Rng) -> Self {
        Self { kind, params, rng }
    }

    pub fn act(&mut self, obs: &ObservationVector) -> ReferenceCommand {
        scripted_policy(obs, self.kind, &self.params, &mut self.rng)
    }
}
