use rand::Rng;

use crate::angle::wrap;
use crate::sim::sensor::{scan, Scan, SensorConfig, CONES};
use crate::sim::world::{Point, World};

/// Agent pose as seen by the policy: planar `(x, y, theta)` for the ground
/// robot, `(p, eta)` for the boat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentPose {
    Planar { x: f64, y: f64, theta: f64 },
    Spatial { p: [f64; 3], eta: [f64; 3] },
}

impl AgentPose {
    pub fn position(&self) -> Point {
        match *self {
            Self::Planar { x, y, .. } => [x, y],
            Self::Spatial { p, .. } => [p[0], p[1]],
        }
    }

    pub fn heading(&self) -> f64 {
        match *self {
            Self::Planar { theta, .. } => theta,
            Self::Spatial { eta, .. } => eta[2],
        }
    }

    fn block(&self) -> Vec<f64> {
        match *self {
            Self::Planar { x, y, theta } => vec![x, y, theta],
            Self::Spatial { p, eta } => vec![p[0], p[1], p[2], eta[0], eta[1], eta[2]],
        }
    }
}

/// Policy input: `[beams(15) | pose block | target_distance | target_heading]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    /// Cone-mean ranges, m, clipped to the sensor range.
    pub beams: [f64; CONES],
    /// 3 entries (planar) or 6 (spatial).
    pub pose: Vec<f64>,
    pub target_distance: f64,
    /// Bearing of the target in the agent frame, `(-pi, pi]`.
    pub target_heading: f64,
}

/// Index of the first pose entry; the position occupies the next two (x, y).
pub const POSE_OFFSET: usize = CONES;
pub const PLANAR_DIM: usize = CONES + 3 + 2;
pub const SPATIAL_DIM: usize = CONES + 6 + 2;

impl ObservationVector {
    pub fn len(&self) -> usize {
        CONES + self.pose.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.beams);
        v.extend_from_slice(&self.pose);
        v.push(self.target_distance);
        v.push(self.target_heading);
        v
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        let pose_len = v.len().checked_sub(CONES + 2)?;
        if pose_len != 3 && pose_len != 6 {
            return None;
        }
        let mut beams = [0.0; CONES];
        beams.copy_from_slice(&v[..CONES]);
        Some(Self {
            beams,
            pose: v[CONES..CONES + pose_len].to_vec(),
            target_distance: v[CONES + pose_len],
            target_heading: v[CONES + pose_len + 1],
        })
    }

    /// Index of the cone with the shortest mean range.
    pub fn min_beam_cone(&self) -> usize {
        let mut best = 0;
        for (k, b) in self.beams.iter().enumerate() {
            if *b < self.beams[best] {
                best = k;
            }
        }
        best
    }
}

/// Builds the policy observation and returns the underlying ray scan so the
/// safety filter can reuse the obstacle returns.
pub fn build_observation<R: Rng>(
    world: &World,
    pose: &AgentPose,
    target: Point,
    sensor: &SensorConfig,
    noise: Option<&mut R>,
) -> (ObservationVector, Scan) {
    let origin = pose.position();
    let heading = pose.heading();
    let s = scan(world, origin, heading, sensor, noise);
    let dx = target[0] - origin[0];
    let dy = target[1] - origin[1];
    let target_distance = dx.hypot(dy);
    let target_heading = if target_distance > 0.0 { wrap(dy.atan2(dx) - heading) } else { 0.0 };
    let obs = ObservationVector { beams: s.cone_means(), pose: pose.block(), target_distance, target_heading };
    (obs, s)
}
