use super::{LinearConstraint, QpError};
use crate::dynamics::ReferenceCommand;

const FEAS_TOL: f64 = 1e-9;

/// Minimal-norm correction satisfying one constraint, in closed form.
pub fn solve_qp(c: &LinearConstraint) -> Result<ReferenceCommand, QpError> {
    if !c.is_finite() {
        return Err(QpError::NonFinite);
    }
    if c.b >= 0.0 {
        return Ok(ReferenceCommand::default());
    }
    if c.is_degenerate() {
        return Err(QpError::Infeasible);
    }
    let n2 = c.a[0] * c.a[0] + c.a[1] * c.a[1];
    let k = -c.b / n2;
    Ok(ReferenceCommand::new(k * c.a[0], k * c.a[1]))
}

fn feasible(x: [f64; 2], cs: &[LinearConstraint]) -> bool {
    cs.iter().all(|c| c.value(x) >= -FEAS_TOL * (1.0 + c.b.abs()))
}

/// Minimal-norm point satisfying every constraint. With two unknowns at most
/// two constraints are active at the optimum, so the candidates are the
/// origin, each single-constraint projection and each pairwise vertex.
pub fn solve_qp_multi(cs: &[LinearConstraint]) -> Result<ReferenceCommand, QpError> {
    if cs.is_empty() {
        return Ok(ReferenceCommand::default());
    }
    if cs.iter().any(|c| !c.is_finite()) {
        return Err(QpError::NonFinite);
    }
    let mut active = Vec::with_capacity(cs.len());
    for c in cs {
        if c.is_degenerate() {
            if c.b < 0.0 {
                return Err(QpError::Infeasible);
            }
        } else {
            active.push(*c);
        }
    }
    let mut candidates: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for c in &active {
        if let Ok(r) = solve_qp(c) {
            candidates.push(r.as_array());
        }
    }
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            let (p, q) = (&active[i], &active[j]);
            let det = p.a[0] * q.a[1] - p.a[1] * q.a[0];
            let scale = (p.a[0].hypot(p.a[1])) * (q.a[0].hypot(q.a[1]));
            if det.abs() <= 1e-12 * scale {
                continue;
            }
            // a_p . x = -b_p, a_q . x = -b_q
            let x = (-p.b * q.a[1] + q.b * p.a[1]) / det;
            let y = (-q.b * p.a[0] + p.b * q.a[0]) / det;
            candidates.push([x, y]);
        }
    }
    candidates
        .into_iter()
        .filter(|x| feasible(*x, &active))
        .min_by(|a, b| (a[0] * a[0] + a[1] * a[1]).total_cmp(&(b[0] * b[0] + b[1] * b[1])))
        .map(|x| ReferenceCommand::new(x[0], x[1]))
        .ok_or(QpError::Infeasible)
}
