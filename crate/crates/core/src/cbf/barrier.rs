use super::{BarrierContext, DSafeMode, LinearConstraint};
use crate::dynamics::{rotation_body_to_earth, BoatState, DynamicsError, ReferenceCommand, UnicycleState};
use crate::sim::world::Point;

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `h = |p - p_obs|^2 - d_safe^2`, m^2.
pub fn barrier_value(p: [f64; 3], p_obs: [f64; 3], d_safe: f64) -> f64 {
    let d = [p[0] - p_obs[0], p[1] - p_obs[1], p[2] - p_obs[2]];
    dot3(d, d) - d_safe * d_safe
}

/// Gradient of `h` over the pose block `[p, eta]`; orientation entries are
/// zero.
pub fn barrier_gradient(p: [f64; 3], p_obs: [f64; 3]) -> [f64; 6] {
    [2.0 * (p[0] - p_obs[0]), 2.0 * (p[1] - p_obs[1]), 2.0 * (p[2] - p_obs[2]), 0.0, 0.0, 0.0]
}

/// Safe distance for the current step given the centroid of the nearest
/// enumerated unsafe area, if any.
pub fn compute_d_safe(ctx: &BarrierContext, p: Point, p_area: Option<Point>) -> f64 {
    let Some(area) = p_area else {
        return ctx.sigma;
    };
    let dist = (p[0] - area[0]).hypot(p[1] - area[1]);
    match ctx.d_safe_mode {
        DSafeMode::PaperLiteral => ctx.sigma.max(dist * dist),
        DSafeMode::ConsistentUnits => ctx.sigma.max(dist.min(ctx.sigma * ctx.kappa_cap)),
        DSafeMode::Inflated => {
            if dist <= ctx.r_look {
                ctx.sigma * ctx.kappa
            } else {
                ctx.sigma
            }
        }
    }
}

/// CBF constraint on the unicycle correction `[v_cbf, w_cbf]`:
/// `a . r_cbf + b >= 0`.
pub fn constraint_coeffs_unicycle(
    s: &UnicycleState,
    r_dnn: &ReferenceCommand,
    p_obs: Point,
    d_safe: f64,
    ctx: &BarrierContext,
) -> LinearConstraint {
    let (sin, cos) = s.theta.sin_cos();
    let dx = s.x - p_obs[0];
    let dy = s.y - p_obs[1];
    let a_v = 2.0 * (dx * cos + dy * sin);
    let a_w = ctx.lookahead_ell * 2.0 * (-dx * sin + dy * cos);
    let h = barrier_value([s.x, s.y, 0.0], [p_obs[0], p_obs[1], 0.0], d_safe);
    LinearConstraint::new([a_v, a_w], a_v * r_dnn.v1 + a_w * r_dnn.w3 + ctx.gamma * h)
}

/// CBF constraint for the boat. The surge column comes from the position
/// rows of the kinematic input map (the body x-axis in Earth coordinates);
/// the yaw-rate column, whose position rows vanish, is replaced by the body
/// y-axis scaled by the look-ahead distance. Sway and heave velocities enter
/// through the drift term.
pub fn constraint_coeffs_boat(
    s: &BoatState,
    r_dnn: &ReferenceCommand,
    p_obs: [f64; 3],
    d_safe: f64,
    ctx: &BarrierContext,
    theta_max: f64,
) -> Result<LinearConstraint, DynamicsError> {
    if !(s.theta.abs() < theta_max) {
        return Err(DynamicsError::Singularity { theta: s.theta, limit: theta_max });
    }
    let r = rotation_body_to_earth(s.phi, s.theta, s.psi);
    let col = |j: usize| [r[0][j], r[1][j], r[2][j]];
    let grad = barrier_gradient(s.position(), p_obs);
    let gp = [grad[0], grad[1], grad[2]];
    let a_v = dot3(gp, col(0));
    let a_w = ctx.lookahead_ell * dot3(gp, col(1));
    let drift = s.v2 * dot3(gp, col(1)) + s.v3 * dot3(gp, col(2));
    let h = barrier_value(s.position(), p_obs, d_safe);
    Ok(LinearConstraint::new([a_v, a_w], drift + a_v * r_dnn.v1 + a_w * r_dnn.w3 + ctx.gamma * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(ell: f64) -> BarrierContext {
        BarrierContext { lookahead_ell: ell, ..BarrierContext::with_sigma(0.4) }
    }

    #[test]
    fn barrier_examples() {
        assert_eq!(barrier_value([0.0, 0.0, 0.0], [3.0, 4.0, 0.0], 5.0), 0.0);
        assert_eq!(barrier_value([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 1.0), -1.0);
        assert_eq!(barrier_value([2.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0), 3.0);
        assert_eq!(barrier_gradient([1.0, 0.0, 0.0], [0.0; 3]), [2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(barrier_gradient([0.3, 0.2, 0.1], [0.3, 0.2, 0.1]), [0.0; 6]);
    }

    #[test]
    fn d_safe_modes() {
        let mut c = BarrierContext::with_sigma(0.4);
        for mode in [DSafeMode::PaperLiteral, DSafeMode::ConsistentUnits, DSafeMode::Inflated] {
            c.d_safe_mode = mode;
            assert_eq!(compute_d_safe(&c, [0.0, 0.0], None), 0.4);
        }
        c.d_safe_mode = DSafeMode::Inflated;
        c.kappa = 1.5;
        c.r_look = 1.0;
        assert!((compute_d_safe(&c, [0.0, 0.0], Some([0.5, 0.0])) - 0.6).abs() < 1e-15);
        assert_eq!(compute_d_safe(&c, [0.0, 0.0], Some([3.0, 0.0])), 0.4);
        c.d_safe_mode = DSafeMode::PaperLiteral;
        assert_eq!(compute_d_safe(&c, [0.0, 0.0], Some([2.0, 0.0])), 4.0);
        c.d_safe_mode = DSafeMode::ConsistentUnits;
        c.kappa_cap = 2.0;
        assert_eq!(compute_d_safe(&c, [0.0, 0.0], Some([2.0, 0.0])), 0.8);
        assert_eq!(compute_d_safe(&c, [0.0, 0.0], Some([0.1, 0.0])), 0.4);
    }

    #[test]
    fn unicycle_geometry() {
        let s = UnicycleState::new(0.0, 0.0, 0.0);
        let r = ReferenceCommand::default();
        let c = constraint_coeffs_unicycle(&s, &r, [2.0, 0.0], 0.4, &ctx(0.3));
        assert_eq!(c.a, [-4.0, 0.0]);
        let c = constraint_coeffs_unicycle(&s, &r, [0.0, 2.0], 0.4, &ctx(0.3));
        assert_eq!(c.a[0], 0.0);
        assert!((c.a[1] + 4.0 * 0.3).abs() < 1e-15);
    }

    // Oracle: the look-ahead point q = p + l (cos t, sin t) has
    // q' = G(t) r with G = [[cos, -l sin], [sin, l cos]]; b must equal
    // grad h . G r_dnn + gamma h with h evaluated at p.
    #[test]
    fn unicycle_b_matches_lie_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = UnicycleState::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let p_obs = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let r = ReferenceCommand::new(rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
            let ell = rng.random_range(0.05..1.0);
            let mut c0 = ctx(ell);
            c0.gamma = rng.random_range(0.1..2.0);
            let lc = constraint_coeffs_unicycle(&s, &r, p_obs, 0.4, &c0);
            let g = [[s.theta.cos(), -ell * s.theta.sin()], [s.theta.sin(), ell * s.theta.cos()]];
            let grad = [2.0 * (s.x - p_obs[0]), 2.0 * (s.y - p_obs[1])];
            let qdot = [g[0][0] * r.v1 + g[0][1] * r.w3, g[1][0] * r.v1 + g[1][1] * r.w3];
            let h = (s.x - p_obs[0]).powi(2) + (s.y - p_obs[1]).powi(2) - 0.16;
            let want = grad[0] * qdot[0] + grad[1] * qdot[1] + c0.gamma * h;
            assert!((lc.b - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn boat_level_heading_zero() {
        let s = BoatState::at_rest(1.0, 0.0, 0.05, 0.0);
        let c = constraint_coeffs_boat(&s, &ReferenceCommand::default(), [3.0, 0.0, 0.05], 0.5, &ctx(0.2), 1.48)
            .unwrap();
        assert!((c.a[0] - 2.0 * (1.0 - 3.0)).abs() < 1e-15);
        assert!(c.a[1].abs() < 1e-15);
        // v2 = v3 = 0: b is only gamma h
        let h = barrier_value(s.position(), [3.0, 0.0, 0.05], 0.5);
        assert!((c.b - h).abs() < 1e-12);
        let mut tilted = s;
        tilted.theta = 1.5;
        assert!(constraint_coeffs_boat(&tilted, &ReferenceCommand::default(), [3.0, 0.0, 0.0], 0.5, &ctx(0.2), 1.48)
            .is_err());
    }

    // Oracle: dense 3x3 rotation products Rz Ry Rx applied to body vectors.
    #[test]
    fn boat_b_matches_dense_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mut s = BoatState::at_rest(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.05, 0.0);
            s.phi = rng.random_range(-0.4..0.4);
            s.theta = rng.random_range(-0.4..0.4);
            s.psi = rng.random_range(-3.0..3.0);
            s.v2 = rng.random_range(-0.5..0.5);
            s.v3 = rng.random_range(-0.2..0.2);
            let p_obs = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0];
            let r = ReferenceCommand::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let c0 = ctx(0.3);
            let lc = constraint_coeffs_boat(&s, &r, p_obs, 0.5, &c0, 1.48).unwrap();

            let (sf, cf) = s.phi.sin_cos();
            let (st, ct) = s.theta.sin_cos();
            let (sp, cp) = s.psi.sin_cos();
            let rz = [[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]];
            let ry = [[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]];
            let rx = [[1.0, 0.0, 0.0], [0.0, cf, -sf], [0.0, sf, cf]];
            let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                    }
                }
                m
            };
            let rot = mul(mul(rz, ry), rx);
            let apply = |v: [f64; 3]| [0, 1, 2].map(|i| (0..3).map(|k| rot[i][k] * v[k]).sum::<f64>());
            let grad = [2.0 * (s.px - p_obs[0]), 2.0 * (s.py - p_obs[1]), 2.0 * (s.pz - p_obs[2])];
            let pdot = apply([r.v1, s.v2, s.v3]);
            let yaw = apply([0.0, c0.lookahead_ell * r.w3, 0.0]);
            let h = barrier_value(s.position(), p_obs, 0.5);
            let want = dot3(grad, pdot) + dot3(grad, yaw) + c0.gamma * h;
            assert!((lc.b - want).abs() < 1e-10 * (1.0 + want.abs()), "{} vs {want}", lc.b);
        }
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            px in -5.0f64..5.0, py in -5.0f64..5.0, pz in -1.0f64..1.0,
            ox in -5.0f64..5.0, oy in -5.0f64..5.0, oz in -1.0f64..1.0,
        ) {
            let p = [px, py, pz];
            let o = [ox, oy, oz];
            let g = barrier_gradient(p, o);
            let step = 1e-5;
            for i in 0..3 {
                let mut a = p;
                let mut b = p;
                a[i] += step;
                b[i] -= step;
                let fd = (barrier_value(a, o, 0.5) - barrier_value(b, o, 0.5)) / (2.0 * step);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
            }
        }
    }
}
