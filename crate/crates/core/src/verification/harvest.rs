use serde::{Deserialize, Serialize};

use super::interval::{IntervalBox, OutputProperty};
use super::VerificationError;
use crate::dynamics::ReferenceCommand;
use crate::policy::ObservationVector;
use crate::sim::sensor::CONES;

/// Observation and action logged on the control step before a collision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub episode: usize,
    pub step: usize,
    pub observation: Vec<f64>,
    pub action: ReferenceCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestConfig {
    /// Neighbourhood half-width as a fraction of each feature's range.
    pub epsilon: f64,
    /// Surge bound imposed when the closest return is straight ahead, m/s.
    pub v_slow: f64,
    /// Keep at most this many pairs (earliest first).
    pub max_pairs: usize,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, v_slow: 0.1, max_pairs: 16 }
    }
}

/// Which side the closest return came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreatSide {
    Front,
    Left,
    Right,
}

/// Cone 0 is frontal, cones 1..=7 sweep counter-clockwise (left), the rest
/// are on the right.
pub fn threat_side(cone: usize) -> ThreatSide {
    match cone {
        0 => ThreatSide::Front,
        k if k <= CONES / 2 => ThreatSide::Left,
        _ => ThreatSide::Right,
    }
}

/// Safety property for a threat: never steer toward it, or slow down when
/// it is ahead.
pub fn property_for(side: ThreatSide, v_slow: f64) -> OutputProperty {
    match side {
        ThreatSide::Front => OutputProperty::surge_at_most(v_slow),
        ThreatSide::Left => OutputProperty::yaw_at_most(0.0),
        ThreatSide::Right => OutputProperty::yaw_at_least(0.0),
    }
}

/// Unsafe (region, property) pairs from collision logs. `feature_ranges`
/// gives the span of each observation feature; the region is the
/// observation padded by `epsilon` times that span.
pub fn harvest_unsafe_pairs(
    records: &[CollisionRecord],
    feature_ranges: &[f64],
    cfg: &HarvestConfig,
) -> Result<Vec<(IntervalBox, OutputProperty)>, VerificationError> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(VerificationError::InvalidBox(format!(
            "epsilon {} yields a degenerate neighbourhood",
            cfg.epsilon
        )));
    }
    let mut out = Vec::new();
    for rec in records.iter().take(cfg.max_pairs) {
        if rec.observation.len() != feature_ranges.len() {
            return Err(VerificationError::DimensionMismatch {
                expected: feature_ranges.len(),
                got: rec.observation.len(),
            });
        }
        let obs = ObservationVector::from_slice(&rec.observation).ok_or(VerificationError::DimensionMismatch {
            expected: feature_ranges.len(),
            got: rec.observation.len(),
        })?;
        let pad: Vec<f64> = feature_ranges.iter().map(|r| cfg.epsilon * r).collect();
        let lo = rec.observation.iter().zip(&pad).map(|(x, p)| x - p).collect();
        let hi = rec.observation.iter().zip(&pad).map(|(x, p)| x + p).collect();
        let region = IntervalBox::new(lo, hi)?;
        out.push((region, property_for(threat_side(obs.min_beam_cone()), cfg.v_slow)));
    }
    Ok(out)
}

/// Feature spans for an observation: beams and target distance span the
/// sensor range, positions the world extent, angles a full turn.
pub fn observation_ranges(pose_len: usize, max_range: f64, world_extent: f64) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut r = vec![max_range; CONES];
    match pose_len {
        3 => r.extend([world_extent, world_extent, tau]),
        _ => r.extend([world_extent, world_extent, 1.0, tau, tau, tau]),
    }
    r.push(world_extent);
    r.push(tau);
    r
}
