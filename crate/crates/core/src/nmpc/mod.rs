//! Nonlinear model predictive control of the boat's surge speed and yaw
//! rate through the two thrusters.
//!
//! Direct single shooting: the decision variables are the thrust pairs over
//! the horizon, the model is rolled out with RK4, and the cost
//! `sum e' Q e + u' R u` is minimized by projected gradient descent with
//! finite-difference gradients and a backtracking line search.

mod solver;
mod track;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use solver::{nmpc_solve, rollout_cost, NmpcSolution, NmpcSolver};
pub use track::{settling_metrics, track_episode, ScheduleStep, SettlingMetrics, TrackingLog, TrackingRow};

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NmpcError {
    #[error("invalid nmpc settings: {0}")]
    InvalidConfig(String),
    #[error("prediction diverged at horizon step {stage}: {source}")]
    Rollout {
        stage: usize,
        #[source]
        source: DynamicsError,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmpcConfig {
    /// Horizon length in control steps.
    pub horizon: usize,
    /// Prediction step and control period, s.
    pub dt: f64,
    /// Integration step inside the prediction and the plant, s.
    pub plant_dt: f64,
    /// Diagonal weights on the `(v1, w3)` tracking error.
    pub q: [f64; 2],
    /// Diagonal weights on `(left, right)` thrust.
    pub r: [f64; 2],
    pub u_min: f64,
    pub u_max: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub warm_start: bool,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 0.05,
            plant_dt: 0.01,
            q: [10.0, 10.0],
            r: [1e-3, 1e-3],
            u_min: -10.0,
            u_max: 20.0,
            max_iters: 50,
            tol: 1e-6,
            warm_start: true,
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<(), NmpcError> {
        let bad = |m: String| Err(NmpcError::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt {} must be positive", self.dt));
        }
        if !(self.plant_dt > 0.0 && self.plant_dt <= self.dt) {
            return bad(format!("plant_dt {} must be in (0, dt]", self.plant_dt));
        }
        if self.q.iter().chain(&self.r).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("weights must be finite and non-negative".into());
        }
        if !(self.u_min <= self.u_max && self.u_min.is_finite() && self.u_max.is_finite()) {
            return bad(format!("thrust bounds [{}, {}] are invalid", self.u_min, self.u_max));
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative".into());
        }
        Ok(())
    }

    /// Integration substeps per control period.
    pub fn substeps(&self) -> usize {
        ((self.dt / self.plant_dt) - 1e-9).ceil().max(1.0) as usize
    }
}
