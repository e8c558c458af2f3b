//! Plant models and fixed-step integration.
//!
//! Two plants are provided: the planar unicycle (velocity-controlled ground
//! robot) and a 12-state aquatic drone driven by two thrusters. The boat uses
//! a z-down Earth frame (north-east-down) with ZYX Euler angles.

mod boat;
mod integrate;
mod unicycle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boat::{
    boat_derivative, boat_dynamic_derivative, boat_forces, boat_kinematic_derivative,
    buoyancy_equilibrium_draft, rotation_body_to_earth, step_boat, BoatParams, BoatState,
    ForceMoment,
};
pub use integrate::rk4_step;
pub use unicycle::{step_unicycle, unicycle_derivative, UnicycleState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("Euler singularity: |theta| = {theta} is not below the guard {limit}")]
    Singularity { theta: f64, limit: f64 },
    #[error("non-finite value in RK4 stage {stage}")]
    NonFinite { stage: usize },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("invalid boat parameters: {0}")]
    InvalidParams(String),
}

/// Reference velocities `[v1, w3]` produced by the policy and the filter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceCommand {
    /// Surge velocity, m/s.
    pub v1: f64,
    /// Yaw rate, rad/s.
    pub w3: f64,
}

impl ReferenceCommand {
    pub fn new(v1: f64, w3: f64) -> Self {
        Self { v1, w3 }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.v1, self.w3]
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite() && self.w3.is_finite()
    }
}

impl std::ops::Add for ReferenceCommand {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v1 + rhs.v1, self.w3 + rhs.w3)
    }
}

/// Left and right thruster forces, N.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrustCommand {
    pub left: f64,
    pub right: f64,
}

impl ThrustCommand {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        Self::new(self.left.clamp(lo, hi), self.right.clamp(lo, hi))
    }

    pub fn mirrored(&self) -> Self {
        Self::new(self.right, self.left)
    }
}

/// State of either plant, as seen by the filter and the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantState {
    Unicycle(UnicycleState),
    Boat(BoatState),
}

impl PlantState {
    /// Planar position, m.
    pub fn position(&self) -> [f64; 2] {
        match self {
            Self::Unicycle(s) => [s.x, s.y],
            Self::Boat(s) => [s.px, s.py],
        }
    }

    pub fn heading(&self) -> f64 {
        match self {
            Self::Unicycle(s) => s.theta,
            Self::Boat(s) => s.psi,
        }
    }
}
