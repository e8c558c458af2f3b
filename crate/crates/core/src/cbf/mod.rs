//! Control barrier function safety filter.
//!
//! The barrier is `h = |p - p_obs|^2 - d_safe^2`. Each control step builds
//! the linear constraint `a . r_cbf + b >= 0` on the correction added to the
//! policy action and solves the minimal-norm QP.

mod barrier;
mod filter;
mod qp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use barrier::{
    barrier_gradient, barrier_value, compute_d_safe, constraint_coeffs_boat, constraint_coeffs_unicycle,
};
pub use filter::{filter_action, lookahead_point};
pub use qp::{solve_qp, solve_qp_multi};

use crate::dynamics::ReferenceCommand;
use crate::sim::world::Point;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    #[error("barrier constraint is infeasible")]
    Infeasible,
    #[error("barrier constraint has non-finite coefficients")]
    NonFinite,
}

/// How the safe distance reacts to nearby enumerated unsafe areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DSafeMode {
    /// `max(sigma, |p - p_area|^2)`.
    PaperLiteral,
    /// `max(sigma, min(|p - p_area|, sigma * kappa_cap))`.
    ConsistentUnits,
    /// `sigma * kappa` when an unsafe area is within `r_look`, else `sigma`.
    #[default]
    Inflated,
}

/// Filter block of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbfConfig {
    pub enabled: bool,
    /// Safety threshold, m. Defaults to 1.2 times the robot radius.
    pub sigma: Option<f64>,
    /// Gain of the linear class-K function, 1/s.
    pub gamma: f64,
    /// Look-ahead distance for the yaw-rate coefficient, m.
    pub lookahead_ell: f64,
    pub d_safe_mode: DSafeMode,
    pub kappa: f64,
    pub kappa_cap: f64,
    /// Lookup radius for unsafe-area footprints, m.
    pub r_look: f64,
    /// Only returns within this distance produce constraints, m.
    pub r_sense: f64,
    pub multi_constraint: bool,
    /// Yaw rate of the stop-and-turn fallback, rad/s.
    pub omega_escape: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            sigma: None,
            gamma: 1.0,
            lookahead_ell: 0.1,
            d_safe_mode: DSafeMode::Inflated,
            kappa: 1.5,
            kappa_cap: 2.0,
            r_look: 1.0,
            r_sense: 1.5,
            multi_constraint: false,
            omega_escape: 1.0,
        }
    }
}

impl CbfConfig {
    pub fn sigma_for(&self, robot_radius: f64) -> f64 {
        self.sigma.unwrap_or(1.2 * robot_radius)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("gamma", self.gamma),
            ("lookahead_ell", self.lookahead_ell),
            ("kappa", self.kappa),
            ("kappa_cap", self.kappa_cap),
            ("r_sense", self.r_sense),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("filter.{name} must be positive, got {v}"));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(format!("filter.sigma must be positive, got {s}"));
            }
        }
        if !(self.r_look >= 0.0 && self.omega_escape >= 0.0) {
            return Err("filter.r_look and filter.omega_escape must be non-negative".into());
        }
        Ok(())
    }

    pub fn context(&self, robot_radius: f64, theta_max: f64) -> BarrierContext {
        BarrierContext {
            sigma: self.sigma_for(robot_radius),
            gamma: self.gamma,
            lookahead_ell: self.lookahead_ell,
            d_safe_mode: self.d_safe_mode,
            kappa: self.kappa,
            kappa_cap: self.kappa_cap,
            r_look: self.r_look,
            r_sense: self.r_sense,
            multi_constraint: self.multi_constraint,
            omega_escape: self.omega_escape,
            theta_max,
        }
    }
}

/// Resolved per-step filter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierContext {
    pub sigma: f64,
    pub gamma: f64,
    pub lookahead_ell: f64,
    pub d_safe_mode: DSafeMode,
    pub kappa: f64,
    pub kappa_cap: f64,
    pub r_look: f64,
    pub r_sense: f64,
    pub multi_constraint: bool,
    pub omega_escape: f64,
    /// Pitch guard for the boat kinematics, rad.
    pub theta_max: f64,
}

impl BarrierContext {
    pub fn with_sigma(sigma: f64) -> Self {
        CbfConfig { sigma: Some(sigma), ..CbfConfig::default() }.context(0.0, 1.48)
    }
}

/// `a . r_cbf + b >= 0` over `r_cbf = [v_cbf, w_cbf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConstraint {
    pub a: [f64; 2],
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(a: [f64; 2], b: f64) -> Self {
        Self { a, b }
    }

    pub fn is_degenerate(&self) -> bool {
        self.a[0].hypot(self.a[1]) < 1e-9
    }

    pub fn is_finite(&self) -> bool {
        self.a[0].is_finite() && self.a[1].is_finite() && self.b.is_finite()
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.a[0] * x[0] + self.a[1] * x[1] + self.b
    }
}

/// Filtered action and diagnostics for one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOutput {
    pub r: ReferenceCommand,
    pub r_dnn: ReferenceCommand,
    pub r_cbf: ReferenceCommand,
    /// Barrier of the nearest return at the look-ahead point, if any.
    pub h: Option<f64>,
    pub d_safe: Option<f64>,
    pub p_obs: Option<Point>,
    pub p_area: Option<Point>,
    pub constraints: usize,
    pub active: bool,
    pub fallback: bool,
}

impl FilterOutput {
    pub fn passthrough(r_dnn: ReferenceCommand) -> Self {
        Self {
            r: r_dnn,
            r_dnn,
            r_cbf: ReferenceCommand::default(),
            h: None,
            d_safe: None,
            p_obs: None,
            p_area: None,
            constraints: 0,
            active: false,
            fallback: false,
        }
    }
}
