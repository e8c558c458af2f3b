use std::collections::BTreeMap;

use super::barrier::{barrier_value, compute_d_safe, constraint_coeffs_boat, constraint_coeffs_unicycle};
use super::qp::{solve_qp, solve_qp_multi};
use super::{BarrierContext, FilterOutput, LinearConstraint};
use crate::angle::wrap;
use crate::dynamics::{rotation_body_to_earth, BoatState, PlantState, ReferenceCommand, UnicycleState};
use crate::sim::sensor::HitPoint;
use crate::sim::world::Point;
use crate::verification::{match_unsafe_regions, SafeSet};

/// Point `lookahead_ell` ahead of the agent along its body x-axis. The
/// barrier is evaluated there so that the yaw rate has a genuine effect on
/// `h`.
pub fn lookahead_point(state: &PlantState, ell: f64) -> [f64; 3] {
    match state {
        PlantState::Unicycle(s) => [s.x + ell * s.theta.cos(), s.y + ell * s.theta.sin(), 0.0],
        PlantState::Boat(s) => {
            let r = rotation_body_to_earth(s.phi, s.theta, s.psi);
            [s.px + ell * r[0][0], s.py + ell * r[1][0], s.pz + ell * r[2][0]]
        }
    }
}

fn constraint_for(
    state: &PlantState,
    anchor: [f64; 3],
    r_dnn: &ReferenceCommand,
    p_obs: Point,
    d_safe: f64,
    ctx: &BarrierContext,
) -> Option<LinearConstraint> {
    match state {
        PlantState::Unicycle(s) => {
            let shifted = UnicycleState { x: anchor[0], y: anchor[1], theta: s.theta };
            Some(constraint_coeffs_unicycle(&shifted, r_dnn, p_obs, d_safe, ctx))
        }
        PlantState::Boat(s) => {
            let shifted = BoatState { px: anchor[0], py: anchor[1], pz: anchor[2], ..*s };
            constraint_coeffs_boat(&shifted, r_dnn, [p_obs[0], p_obs[1], anchor[2]], d_safe, ctx, ctx.theta_max).ok()
        }
    }
}

/// Minimally modifies `r_dnn` so that the barrier of the nearest sensed
/// obstacle (or of every sensed obstacle within `r_sense` in multi mode)
/// stays non-negative. When the QP has no solution the agent stops and turns
/// away from the closest return.
pub fn filter_action(
    state: &PlantState,
    r_dnn: ReferenceCommand,
    hits: &[HitPoint],
    safe_set: Option<&SafeSet>,
    ctx: &BarrierContext,
) -> FilterOutput {
    let mut out = FilterOutput::passthrough(r_dnn);
    let anchor = lookahead_point(state, ctx.lookahead_ell);
    let a2 = [anchor[0], anchor[1]];
    let dist = |p: Point| (p[0] - a2[0]).hypot(p[1] - a2[1]);

    // nearest return per obstacle id, within sensing radius of the anchor
    let mut per_obstacle: BTreeMap<usize, (f64, Point)> = BTreeMap::new();
    for hit in hits {
        let d = dist(hit.point);
        if d > ctx.r_sense {
            continue;
        }
        let e = per_obstacle.entry(hit.obstacle).or_insert((d, hit.point));
        if d < e.0 {
            *e = (d, hit.point);
        }
    }
    let Some(&(_, nearest)) = per_obstacle.values().min_by(|a, b| a.0.total_cmp(&b.0)) else {
        return out;
    };

    let position = state.position();
    let p_area = safe_set.and_then(|set| {
        match_unsafe_regions(position, set, ctx.r_look)
            .into_iter()
            .map(|m| m.area.p_area)
            .min_by(|a, b| {
                let da = (a[0] - position[0]).hypot(a[1] - position[1]);
                let db = (b[0] - position[0]).hypot(b[1] - position[1]);
                da.total_cmp(&db)
            })
    });
    let d_safe = compute_d_safe(ctx, position, p_area);
    out.d_safe = Some(d_safe);
    out.p_area = p_area;
    out.p_obs = Some(nearest);
    out.h = Some(barrier_value(anchor, [nearest[0], nearest[1], anchor[2]], d_safe));

    let targets: Vec<Point> =
        if ctx.multi_constraint { per_obstacle.values().map(|v| v.1).collect() } else { vec![nearest] };
    let constraints: Vec<LinearConstraint> =
        targets.iter().filter_map(|p| constraint_for(state, anchor, &r_dnn, *p, d_safe, ctx)).collect();
    out.constraints = constraints.len();
    if constraints.is_empty() {
        return out;
    }
    let solved = if constraints.len() == 1 { solve_qp(&constraints[0]) } else { solve_qp_multi(&constraints) };
    match solved {
        Ok(r_cbf) => {
            out.active = r_cbf != ReferenceCommand::default();
            out.r_cbf = r_cbf;
            out.r = r_dnn + r_cbf;
        }
        Err(e) => {
            let bearing = wrap((nearest[1] - position[1]).atan2(nearest[0] - position[0]) - state.heading());
            let w = if bearing > 0.0 { -ctx.omega_escape } else { ctx.omega_escape };
            log::debug!("cbf qp failed ({e}); escaping with w3 = {w}");
            out.fallback = true;
            out.active = true;
            out.r = ReferenceCommand::new(0.0, w);
            out.r_cbf = ReferenceCommand::new(out.r.v1 - r_dnn.v1, out.r.w3 - r_dnn.w3);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> BarrierContext {
        BarrierContext { lookahead_ell: 0.1, ..BarrierContext::with_sigma(0.35) }
    }

    fn hit(p: Point, id: usize) -> HitPoint {
        HitPoint { point: p, range: p[0].hypot(p[1]), obstacle: id }
    }

    fn uni(x: f64, y: f64, th: f64) -> PlantState {
        PlantState::Unicycle(UnicycleState::new(x, y, th))
    }

    #[test]
    fn nothing_sensed_passes_through() {
        let r = ReferenceCommand::new(0.4, 0.2);
        let out = filter_action(&uni(0.0, 0.0, 0.0), r, &[], None, &ctx());
        assert_eq!(out.r, r);
        assert!(!out.active && out.h.is_none());
        let far = [hit([5.0, 0.0], 0)];
        assert_eq!(filter_action(&uni(0.0, 0.0, 0.0), r, &far, None, &ctx()).r, r);
    }

    // Oracle: rebuild the constraint from scratch and re-check feasibility
    // of the filtered action.
    #[test]
    fn head_on_obstacle_is_corrected() {
        let c = ctx();
        let r = ReferenceCommand::new(0.5, 0.0);
        let state = uni(0.0, 0.0, 0.0);
        let out = filter_action(&state, r, &[hit([0.5, 0.0], 0)], None, &c);
        assert!(out.active);
        assert!(out.r.v1 < r.v1);
        let q = [0.1, 0.0];
        let (dx, dy) = (q[0] - 0.5, q[1] - 0.0);
        let a = [2.0 * dx, c.lookahead_ell * 2.0 * dy];
        let h = dx * dx + dy * dy - 0.35 * 0.35;
        let hdot = a[0] * out.r.v1 + a[1] * out.r.w3;
        assert!(hdot + c.gamma * h >= -1e-9);
    }

    #[test]
    fn boundary_tangential_motion_untouched() {
        let c = ctx();
        // anchor at the origin, obstacle point at distance d_safe to the left
        let state = uni(-0.1, 0.0, 0.0);
        let r = ReferenceCommand::new(0.3, 0.0);
        let out = filter_action(&state, r, &[hit([0.0, 0.35], 0)], None, &c);
        assert!(out.h.unwrap().abs() < 1e-12);
        assert_eq!(out.r_cbf, ReferenceCommand::default());
        assert_eq!(out.r, r);
    }

    #[test]
    fn inactive_constraint_is_identity() {
        let r = ReferenceCommand::new(-0.2, 0.0);
        let out = filter_action(&uni(0.0, 0.0, 0.0), r, &[hit([0.6, 0.0], 0)], None, &ctx());
        assert_eq!(out.r, r);
        assert_eq!(out.r_cbf, ReferenceCommand::default());
    }

    #[test]
    fn multi_mode_uses_every_obstacle() {
        let mut c = ctx();
        c.multi_constraint = true;
        let hits = [hit([0.5, 0.3], 0), hit([0.5, -0.3], 1), hit([0.6, -0.3], 1)];
        let out = filter_action(&uni(0.0, 0.0, 0.0), ReferenceCommand::new(0.5, 0.0), &hits, None, &c);
        assert_eq!(out.constraints, 2);
        c.multi_constraint = false;
        let out = filter_action(&uni(0.0, 0.0, 0.0), ReferenceCommand::new(0.5, 0.0), &hits, None, &c);
        assert_eq!(out.constraints, 1);
    }

    #[test]
    fn degenerate_constraint_falls_back_to_escape() {
        // anchor exactly on the obstacle point: gradient vanishes, h < 0
        let out = filter_action(&uni(0.0, 0.0, 0.0), ReferenceCommand::new(0.5, 0.0), &[hit([0.1, 0.0], 0)], None, &ctx());
        assert!(out.fallback);
        assert_eq!(out.r.v1, 0.0);
        assert!(out.r.w3 != 0.0);
    }

    #[test]
    fn boat_filter_slows_toward_obstacle() {
        let s = BoatState { v1: 0.5, ..BoatState::at_rest(0.0, 0.0, 0.05, 0.0) };
        let mut c = ctx();
        c.sigma = 0.6;
        let out = filter_action(&PlantState::Boat(s), ReferenceCommand::new(0.8, 0.0), &[hit([0.9, 0.0], 0)], None, &c);
        assert!(out.active);
        assert!(out.r.v1 < 0.8);
    }
}
