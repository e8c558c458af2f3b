use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let two_pi = 2.0 * PI;
    let mut a = angle.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    // rem_euclid can land exactly on -pi after the shift
    if a <= -PI {
        a += two_pi;
    }
    a
}
