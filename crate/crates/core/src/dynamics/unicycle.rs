use serde::{Deserialize, Serialize};

use super::{rk4_step, DynamicsError, ReferenceCommand};
use crate::angle::wrap;

/// Planar pose of a velocity-controlled ground robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    /// Heading, wrapped to `(-pi, pi]`.
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap(theta) }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.as_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(DynamicsError::InvalidState(format!("non-finite unicycle state {self:?}")))
        }
    }
}

/// `(x', y', theta') = (v cos theta, v sin theta, w)`.
pub fn unicycle_derivative(
    s: &UnicycleState,
    r: &ReferenceCommand,
) -> Result<[f64; 3], DynamicsError> {
    s.validate()?;
    if !r.is_finite() {
        return Err(DynamicsError::InvalidState(format!("non-finite command {r:?}")));
    }
    Ok([r.v1 * s.theta.cos(), r.v1 * s.theta.sin(), r.w3])
}

/// Integrates the unicycle over `dt` holding `r`, plus an optional constant
/// Earth-frame drift velocity.
pub fn step_unicycle(
    s: &UnicycleState,
    r: &ReferenceCommand,
    drift: [f64; 2],
    dt: f64,
) -> Result<UnicycleState, DynamicsError> {
    let next = rk4_step(
        |x: &[f64; 3]| {
            let d = unicycle_derivative(&UnicycleState { x: x[0], y: x[1], theta: x[2] }, r)?;
            Ok([d[0] + drift[0], d[1] + drift[1], d[2]])
        },
        &s.as_array(),
        dt,
    )?;
    Ok(UnicycleState::from_array(next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn derivative_examples() {
        let d = unicycle_derivative(&UnicycleState::new(0.0, 0.0, 0.0), &ReferenceCommand::new(1.0, 0.0));
        assert!(close(d.unwrap(), [1.0, 0.0, 0.0]));
        let d = unicycle_derivative(&UnicycleState::new(0.0, 0.0, PI / 2.0), &ReferenceCommand::new(1.0, 0.0));
        assert!(close(d.unwrap(), [0.0, 1.0, 0.0]));
        let d = unicycle_derivative(&UnicycleState::new(0.0, 0.0, 0.0), &ReferenceCommand::new(0.0, 0.5));
        assert!(close(d.unwrap(), [0.0, 0.0, 0.5]));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let s = UnicycleState { x: f64::NAN, y: 0.0, theta: 0.0 };
        assert!(matches!(
            unicycle_derivative(&s, &ReferenceCommand::default()),
            Err(DynamicsError::InvalidState(_))
        ));
        let s = UnicycleState::default();
        assert!(unicycle_derivative(&s, &ReferenceCommand::new(f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn full_circle_closes() {
        let r = ReferenceCommand::new(1.0, 1.0);
        let n = 1000;
        let dt = 2.0 * PI / n as f64;
        let mut s = UnicycleState::default();
        for _ in 0..n {
            s = step_unicycle(&s, &r, [0.0, 0.0], dt).unwrap();
        }
        // O(dt^4) closure error
        assert!(s.x.hypot(s.y) < 1e-9, "{s:?}");
        assert!(s.theta.abs() < 1e-9);
    }

    #[test]
    fn heading_is_wrapped() {
        let mut s = UnicycleState::new(0.0, 0.0, 3.0);
        for _ in 0..10 {
            s = step_unicycle(&s, &ReferenceCommand::new(0.0, 1.0), [0.0, 0.0], 0.1).unwrap();
        }
        assert!(s.theta > -PI && s.theta <= PI);
        assert!((s.theta - wrap(4.0)).abs() < 1e-12);
    }
}
