use super::{NmpcConfig, NmpcError};
use crate::dynamics::{step_boat, BoatParams, BoatState, DynamicsError, ReferenceCommand, ThrustCommand};

#[derive(Debug, Clone, PartialEq)]
pub struct NmpcSolution {
    /// First planned input, applied to the plant.
    pub u_star: ThrustCommand,
    pub plan: Vec<ThrustCommand>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after each accepted iterate, starting with the initial plan.
    pub cost_history: Vec<f64>,
}

impl NmpcSolution {
    pub fn is_monotone(&self) -> bool {
        self.cost_history.windows(2).all(|w| w[1] <= w[0])
    }
}

struct Problem<'a> {
    x0: BoatState,
    r: ReferenceCommand,
    cfg: &'a NmpcConfig,
    params: &'a BoatParams,
}

impl Problem<'_> {
    fn predict(&self, x: &BoatState, u: ThrustCommand) -> Result<BoatState, DynamicsError> {
        step_boat(x, &u, self.params, [0.0, 0.0], self.cfg.dt)
    }

    fn stage_cost(&self, next: &BoatState, u: ThrustCommand) -> f64 {
        let e = [next.v1 - self.r.v1, next.w3 - self.r.w3];
        self.cfg.q[0] * e[0] * e[0]
            + self.cfg.q[1] * e[1] * e[1]
            + self.cfg.r[0] * u.left * u.left
            + self.cfg.r[1] * u.right * u.right
    }

    /// States `x_0..x_H` and cumulative costs `c_0 = 0 .. c_H = J`.
    fn rollout(&self, plan: &[f64]) -> Result<(Vec<BoatState>, Vec<f64>), NmpcError> {
        let h = self.cfg.horizon;
        let mut states = Vec::with_capacity(h + 1);
        let mut cum = Vec::with_capacity(h + 1);
        states.push(self.x0);
        cum.push(0.0);
        for k in 0..h {
            let u = ThrustCommand::new(plan[2 * k], plan[2 * k + 1]);
            let next =
                self.predict(&states[k], u).map_err(|source| NmpcError::Rollout { stage: k + 1, source })?;
            cum.push(cum[k] + self.stage_cost(&next, u));
            states.push(next);
        }
        Ok((states, cum))
    }

    fn cost(&self, plan: &[f64]) -> f64 {
        self.rollout(plan).map(|(_, c)| c[self.cfg.horizon]).unwrap_or(f64::INFINITY)
    }

    /// Forward differences, re-using the unperturbed prefix of the rollout.
    fn gradient(&self, plan: &[f64], states: &[BoatState], cum: &[f64]) -> Result<Vec<f64>, NmpcError> {
        let h = self.cfg.horizon;
        let base = cum[h];
        let mut g = vec![0.0; plan.len()];
        let mut trial = plan.to_vec();
        for (i, gi) in g.iter_mut().enumerate() {
            let k = i / 2;
            let step = 1e-6 * (1.0 + plan[i].abs());
            trial[i] = plan[i] + step;
            let mut x = states[k];
            let mut c = cum[k];
            for j in k..h {
                let u = ThrustCommand::new(trial[2 * j], trial[2 * j + 1]);
                x = self.predict(&x, u).map_err(|source| NmpcError::Rollout { stage: j + 1, source })?;
                c += self.stage_cost(&x, u);
            }
            trial[i] = plan[i];
            *gi = (c - base) / step;
        }
        Ok(g)
    }

    fn project(&self, plan: &mut [f64]) {
        for u in plan {
            *u = u.clamp(self.cfg.u_min, self.cfg.u_max);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// One NMPC solve from `x_k` toward the reference `r`. `initial` is the
/// starting plan (e.g. the shifted previous solution); it is clamped into the
/// bounds. The cost never increases from one accepted iterate to the next.
pub fn nmpc_solve(
    x_k: &BoatState,
    r: &ReferenceCommand,
    cfg: &NmpcConfig,
    params: &BoatParams,
    initial: Option<&[ThrustCommand]>,
) -> Result<NmpcSolution, NmpcError> {
    cfg.validate()?;
    x_k.validate(params.theta_max)?;
    let h = cfg.horizon;
    let prob = Problem { x0: *x_k, r: *r, cfg, params };
    let mut plan: Vec<f64> = (0..h)
        .flat_map(|k| {
            let u = initial.and_then(|p| p.get(k).or(p.last())).copied().unwrap_or_default();
            [u.left, u.right]
        })
        .collect();
    prob.project(&mut plan);

    let (mut states, mut cum) = prob.rollout(&plan)?;
    let mut cost = cum[h];
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut alpha = f64::NAN;

    while iterations < cfg.max_iters {
        iterations += 1;
        let g = prob.gradient(&plan, &states, &cum)?;
        let mut pg = plan.iter().zip(&g).map(|(u, gi)| u - gi).collect::<Vec<_>>();
        prob.project(&mut pg);
        if plan.iter().zip(&pg).all(|(a, b)| (a - b).abs() <= 1e-12) {
            converged = true;
            break;
        }
        alpha = match &prev {
            Some((p_old, g_old)) => {
                let s: Vec<f64> = plan.iter().zip(p_old).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(g_old).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 0.0 {
                    (dot(&s, &s) / sy).clamp(1e-8, 1e4)
                } else {
                    (alpha * 2.0).min(1e4)
                }
            }
            None => 0.5 / inf_norm(&g).max(1e-12),
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = plan.iter().zip(&g).map(|(u, gi)| u - alpha * gi).collect();
            prob.project(&mut trial);
            let d: Vec<f64> = plan.iter().zip(&trial).map(|(a, b)| a - b).collect();
            if inf_norm(&d) == 0.0 {
                break;
            }
            let c = prob.cost(&trial);
            if c <= cost - 1e-4 * dot(&g, &d) && c <= cost {
                accepted = Some((trial, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            converged = true;
            break;
        };
        let decrease = cost - next_cost;
        prev = Some((std::mem::replace(&mut plan, next), g));
        (states, cum) = prob.rollout(&plan)?;
        cost = cum[h];
        debug_assert_eq!(cost, next_cost);
        history.push(cost);
        if decrease <= cfg.tol {
            converged = true;
            break;
        }
    }

    let plan: Vec<ThrustCommand> = plan.chunks_exact(2).map(|c| ThrustCommand::new(c[0], c[1])).collect();
    Ok(NmpcSolution { u_star: plan[0], plan, cost, iterations, converged, cost_history: history })
}

/// Cost of a fixed plan, for oracles and diagnostics.
pub fn rollout_cost(
    x_k: &BoatState,
    r: &ReferenceCommand,
    cfg: &NmpcConfig,
    params: &BoatParams,
    plan: &[ThrustCommand],
) -> Result<f64, NmpcError> {
    let prob = Problem { x0: *x_k, r: *r, cfg, params };
    let flat: Vec<f64> = plan.iter().flat_map(|u| [u.left, u.right]).collect();
    Ok(prob.rollout(&flat)?.1[cfg.horizon])
}

/// Receding-horizon controller that keeps its previous plan for warm
/// starts. One instance per agent.
#[derive(Debug, Clone)]
pub struct NmpcSolver {
    pub cfg: NmpcConfig,
    pub params: BoatParams,
    previous: Option<Vec<ThrustCommand>>,
}

impl NmpcSolver {
    pub fn new(cfg: NmpcConfig, params: BoatParams) -> Result<Self, NmpcError> {
        cfg.validate()?;
        params.validate()?;
        Ok(Self { cfg, params, previous: None })
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Seeds the warm start with a constant plan.
    pub fn warm_with(&mut self, u: ThrustCommand) {
        self.previous = Some(vec![u; self.cfg.horizon]);
    }

    pub fn solve(&mut self, x: &BoatState, r: &ReferenceCommand) -> Result<NmpcSolution, NmpcError> {
        let initial = if self.cfg.warm_start { self.previous.as_deref() } else { None };
        let sol = nmpc_solve(x, r, &self.cfg, &self.params, initial)?;
        let mut shifted = sol.plan[1..].to_vec();
        shifted.push(*sol.plan.last().expect("horizon >= 1"));
        self.previous = Some(shifted);
        Ok(sol)
    }
}
