use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sensor::SensorConfig;
use super::trajectory::TrajectoryRow;
use super::world::{dist, Point, World};
use super::{EpisodeResult, Outcome, SimError};
use crate::angle::wrap;
use crate::cbf::{filter_action, lookahead_point, BarrierContext, FilterOutput};
use crate::dynamics::{
    buoyancy_equilibrium_draft, step_boat, step_unicycle, BoatParams, BoatState, PlantState, ReferenceCommand,
    ThrustCommand, UnicycleState,
};
use crate::error::Error;
use crate::nmpc::{NmpcConfig, NmpcSolver};
use crate::policy::{build_observation, AgentPose, GoalSeekerParams, Policy, PolicyNetwork, ScriptedKind, ScriptedPolicy};
use crate::rng::{stream, STREAM_DISTURBANCE, STREAM_POLICY, STREAM_SENSOR};
use crate::verification::{CollisionRecord, SafeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentModel {
    Unicycle,
    Boat,
}

/// Earth-frame drift added to the position rates, plus range noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceConfig {
    /// Constant drift velocity, m/s.
    pub drift: [f64; 2],
    /// Per-axis standard deviation of the gust added each control period, m/s.
    pub gust_sigma: f64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self { drift: [0.0, 0.0], gust_sigma: 0.0 }
    }
}

/// Detour used when the safety filter pins the agent in front of an
/// obstacle. The nominal command is replaced by the same goal-seeking law
/// aimed along the obstacle tangent on the side facing the target; the
/// filter still applies on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeConfig {
    pub enabled: bool,
    /// Mean speed below which a filtered agent counts as stalled, m/s.
    pub stall_speed: f64,
    /// Window over which the mean speed is measured, s.
    pub stall_time: f64,
    /// Longest detour, s.
    pub max_detour: f64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self { enabled: true, stall_speed: 0.05, stall_time: 1.0, max_detour: 15.0 }
    }
}

/// Where the nominal command comes from.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Scripted { kind: ScriptedKind, params: GoalSeekerParams },
    Network(Arc<PolicyNetwork>),
}

/// Everything needed to run an episode apart from the world and the seed.
#[derive(Debug, Clone)]
pub struct Stack {
    pub model: AgentModel,
    /// Collision radius of the agent body, m.
    pub radius: f64,
    pub boat: BoatParams,
    pub sensor: SensorConfig,
    pub policy: PolicySource,
    /// `None` runs the policy unfiltered.
    pub filter: Option<BarrierContext>,
    pub safe_set: Option<Arc<SafeSet>>,
    pub escape: EscapeConfig,
    pub nmpc: NmpcConfig,
    pub disturbance: DisturbanceConfig,
    /// Control period for the unicycle, s. The boat uses the NMPC period.
    pub control_dt: f64,
    /// Integration step for the unicycle, s. The boat uses the NMPC value.
    pub plant_dt: f64,
    pub max_steps: usize,
    pub record_trajectory: bool,
}

impl Stack {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidStack(m));
        if !(self.radius > 0.0) {
            return bad(format!("agent radius {} must be positive", self.radius));
        }
        if !(self.control_dt > 0.0 && self.plant_dt > 0.0 && self.plant_dt <= self.control_dt) {
            return bad("need 0 < plant_dt <= control_dt".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.disturbance.gust_sigma < 0.0 || self.sensor.noise_sigma < 0.0 {
            return bad("noise levels must be non-negative".into());
        }
        if let PolicySource::Network(net) = &self.policy {
            let want = self.observation_dim();
            if net.input_dim != want {
                return bad(format!("network expects {} inputs, observation has {want}", net.input_dim));
            }
        }
        if self.model == AgentModel::Boat {
            self.nmpc.validate().map_err(|e| SimError::InvalidStack(e.to_string()))?;
            self.boat.validate().map_err(|e| SimError::InvalidStack(e.to_string()))?;
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        match self.model {
            AgentModel::Unicycle => crate::policy::PLANAR_DIM,
            AgentModel::Boat => crate::policy::SPATIAL_DIM,
        }
    }

    fn period(&self) -> (f64, usize) {
        match self.model {
            AgentModel::Unicycle => {
                let n = ((self.control_dt / self.plant_dt) - 1e-9).ceil().max(1.0) as usize;
                (self.control_dt, n)
            }
            AgentModel::Boat => (self.nmpc.dt, self.nmpc.substeps()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EscapeState {
    /// Time the filter has been active with the agent inside the stall
    /// radius around `anchor`.
    Idle { anchor: Point, stalled_for: f64 },
    /// `side` is +1 to keep the obstacle on the right, -1 to keep it on the
    /// left.
    /// `start` is the target distance when the detour began.
    Detour { side: f64, elapsed: f64, start: f64 },
}

/// Mutable per-episode agent.
pub struct Agent {
    pub state: PlantState,
    pub t: f64,
    policy: Policy,
    nmpc: Option<NmpcSolver>,
    escape: EscapeState,
    sensor_rng: ChaCha8Rng,
    gust_rng: ChaCha8Rng,
}

impl Agent {
    pub fn spawn(world: &World, stack: &Stack, seed: u64) -> Result<Self, Error> {
        let s = world.spawn;
        let state = match stack.model {
            AgentModel::Unicycle => PlantState::Unicycle(UnicycleState::new(s.x, s.y, s.heading)),
            AgentModel::Boat => {
                let z = buoyancy_equilibrium_draft(&stack.boat)
                    .ok_or_else(|| SimError::InvalidStack("hull cannot float".into()))?;
                PlantState::Boat(BoatState::at_rest(s.x, s.y, z, s.heading))
            }
        };
        let policy = match &stack.policy {
            PolicySource::Scripted { kind, params } => {
                Policy::Scripted(ScriptedPolicy::new(*kind, params.clone(), stream(seed, STREAM_POLICY)))
            }
            PolicySource::Network(net) => Policy::Network((**net).clone()),
        };
        let nmpc = match stack.model {
            AgentModel::Boat => Some(NmpcSolver::new(stack.nmpc.clone(), stack.boat.clone())?),
            AgentModel::Unicycle => None,
        };
        Ok(Self {
            state,
            t: 0.0,
            policy,
            nmpc,
            escape: EscapeState::Idle { anchor: [s.x, s.y], stalled_for: 0.0 },
            sensor_rng: stream(seed, STREAM_SENSOR),
            gust_rng: stream(seed, STREAM_DISTURBANCE),
        })
    }

    fn pose(&self) -> AgentPose {
        match self.state {
            PlantState::Unicycle(s) => AgentPose::Planar { x: s.x, y: s.y, theta: s.theta },
            PlantState::Boat(s) => AgentPose::Spatial { p: s.position(), eta: [s.phi, s.theta, s.psi] },
        }
    }
}

/// Per-step record returned by [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub filter: FilterOutput,
    pub thrust: Option<ThrustCommand>,
    pub observation: Vec<f64>,
    /// Smallest barrier value seen over the integration substeps, using the
    /// true obstacle geometry at the look-ahead point.
    pub min_h: Option<f64>,
    pub clearance: f64,
    pub collided: bool,
    pub detour: bool,
}

fn nominal_with_escape(
    agent: &mut Agent,
    stack: &Stack,
    obs: &crate::policy::ObservationVector,
    r_dnn: ReferenceCommand,
    nearest: Option<Point>,
    world: &World,
) -> (ReferenceCommand, bool) {
    let EscapeState::Detour { side, elapsed, start } = agent.escape else {
        return (r_dnn, false);
    };
    let p = agent.state.position();
    let heading = agent.state.heading();
    let Some(q) = nearest else {
        agent.escape = EscapeState::Idle { anchor: p, stalled_for: 0.0 };
        return (r_dnn, false);
    };
    let to_obs = (q[1] - p[1]).atan2(q[0] - p[0]);
    let to_target = (world.target[1] - p[1]).atan2(world.target[0] - p[0]);
    let (dt, _) = stack.period();
    // leave once closer to the target than at the start with the obstacle
    // no longer in between
    let clear = wrap(to_target - to_obs).abs() > std::f64::consts::FRAC_PI_2;
    let closer = dist(p, world.target) < start - stack.escape.stall_speed * stack.escape.stall_time;
    if (clear && closer) || elapsed >= stack.escape.max_detour {
        agent.escape = EscapeState::Idle { anchor: p, stalled_for: 0.0 };
        return (r_dnn, false);
    }
    agent.escape = EscapeState::Detour { side, elapsed: elapsed + dt, start };
    let tangent = to_obs + side * std::f64::consts::FRAC_PI_2;
    let params = match &stack.policy {
        PolicySource::Scripted { params, .. } => params.clone(),
        PolicySource::Network(_) => GoalSeekerParams::default(),
    };
    let mut virtual_obs = obs.clone();
    virtual_obs.target_heading = wrap(tangent - heading);
    (crate::policy::goal_seeker(&virtual_obs, &params), true)
}

fn update_stall(agent: &mut Agent, stack: &Stack, out: &FilterOutput, world: &World) {
    if !stack.escape.enabled {
        return;
    }
    let EscapeState::Idle { anchor, stalled_for } = agent.escape else {
        return;
    };
    let (dt, _) = stack.period();
    let p = agent.state.position();
    let radius = stack.escape.stall_speed * stack.escape.stall_time;
    if !out.active || dist(p, anchor) > radius {
        agent.escape = EscapeState::Idle { anchor: p, stalled_for: 0.0 };
        return;
    }
    let stalled_for = stalled_for + dt;
    agent.escape = EscapeState::Idle { anchor, stalled_for };
    if stalled_for < stack.escape.stall_time {
        return;
    }
    if let Some(q) = out.p_obs {
        let to_obs = (q[1] - p[1]).atan2(q[0] - p[0]);
        let to_target = (world.target[1] - p[1]).atan2(world.target[0] - p[0]);
        // pass on the side facing the target
        let side = if wrap(to_target - to_obs) >= 0.0 { 1.0 } else { -1.0 };
        agent.escape = EscapeState::Detour { side, elapsed: 0.0, start: dist(p, world.target) };
    }
}

/// Signed barrier value at the look-ahead point against the true geometry.
fn geometric_h(world: &World, state: &PlantState, ctx: &BarrierContext, d_safe: f64) -> f64 {
    let a = lookahead_point(state, ctx.lookahead_ell);
    let c = world.clearance([a[0], a[1]]);
    c * c.abs() - d_safe * d_safe
}

/// One control period: observe, act, filter, control, integrate, check for
/// contact.
pub fn step(world: &World, stack: &Stack, agent: &mut Agent) -> Result<StepDiagnostics, Error> {
    let (control_dt, substeps) = stack.period();
    let h_step = control_dt / substeps as f64;
    let pose = agent.pose();
    let noise = (stack.sensor.noise_sigma > 0.0).then_some(&mut agent.sensor_rng);
    let (obs, scan) = build_observation(world, &pose, world.target, &stack.sensor, noise);
    let r_dnn = agent.policy.act(&obs)?;

    let mut filtered = FilterOutput::passthrough(r_dnn);
    let mut detour = false;
    if let Some(ctx) = &stack.filter {
        let hits = scan.hit_points();
        let first = filter_action(&agent.state, r_dnn, &hits, stack.safe_set.as_deref(), ctx);
        let (nominal, on_detour) = nominal_with_escape(agent, stack, &obs, r_dnn, first.p_obs, world);
        detour = on_detour;
        filtered = if on_detour {
            let mut out = filter_action(&agent.state, nominal, &hits, stack.safe_set.as_deref(), ctx);
            out.r_dnn = r_dnn;
            out.r_cbf = ReferenceCommand::new(out.r.v1 - r_dnn.v1, out.r.w3 - r_dnn.w3);
            out.active = true;
            out
        } else {
            first
        };
        update_stall(agent, stack, &filtered, world);
    }
    let r = filtered.r;

    let thrust = match agent.nmpc.as_mut() {
        Some(solver) => {
            let PlantState::Boat(x) = agent.state else { unreachable!("nmpc only drives the boat") };
            Some(solver.solve(&x, &r)?.u_star)
        }
        None => None,
    };

    let mut drift = stack.disturbance.drift;
    if stack.disturbance.gust_sigma > 0.0 {
        let n = Normal::new(0.0, stack.disturbance.gust_sigma).expect("sigma checked non-negative");
        drift[0] += n.sample(&mut agent.gust_rng);
        drift[1] += n.sample(&mut agent.gust_rng);
    }

    let mut min_h: Option<f64> = None;
    let mut clearance = f64::INFINITY;
    let mut collided = false;
    for _ in 0..substeps {
        agent.state = match (agent.state, thrust) {
            (PlantState::Unicycle(s), _) => PlantState::Unicycle(step_unicycle(&s, &r, drift, h_step)?),
            (PlantState::Boat(s), Some(u)) => PlantState::Boat(step_boat(&s, &u, &stack.boat, drift, h_step)?),
            (PlantState::Boat(_), None) => unreachable!("boat always has a controller"),
        };
        agent.t += h_step;
        let c = world.clearance(agent.state.position());
        clearance = clearance.min(c);
        if let Some(ctx) = &stack.filter {
            let h = geometric_h(world, &agent.state, ctx, filtered.d_safe.unwrap_or(ctx.sigma));
            min_h = Some(min_h.map_or(h, |m: f64| m.min(h)));
        }
        if c < stack.radius {
            collided = true;
            break;
        }
    }
    Ok(StepDiagnostics { filter: filtered, thrust, observation: obs.to_vec(), min_h, clearance, collided, detour })
}

fn reached(world: &World, state: &PlantState) -> bool {
    dist(state.position(), world.target) <= world.target_radius
}

/// Runs one episode to success, contact or the step limit. Component
/// failures end the episode as a timeout carrying the error message.
pub fn run_episode(world: &World, stack: &Stack, seed: u64) -> Result<EpisodeResult, SimError> {
    stack.validate()?;
    world.validate()?;
    let mut agent = Agent::spawn(world, stack, seed).map_err(|e| SimError::InvalidStack(e.to_string()))?;
    let mut res = EpisodeResult::new(seed, stack.filter.is_some());
    if let Some(ctx) = &stack.filter {
        res.min_h = Some(geometric_h(world, &agent.state, ctx, ctx.sigma));
    }
    res.min_clearance = world.clearance(agent.state.position());
    let mut trajectory = Vec::new();
    if reached(world, &agent.state) {
        res.outcome = Outcome::Success;
        return Ok(res);
    }
    let mut last = agent.state.position();
    while res.steps < stack.max_steps {
        let t0 = agent.t;
        let before = agent.state;
        let d = match step(world, stack, &mut agent) {
            Ok(d) => d,
            Err(e) => {
                res.outcome = Outcome::Timeout;
                res.error = Some(e.to_string());
                break;
            }
        };
        res.steps += 1;
        if let (Some(m), Some(h)) = (res.min_h, d.min_h) {
            res.min_h = Some(m.min(h));
        }
        res.min_clearance = res.min_clearance.min(d.clearance);
        res.corrections += d.filter.active as usize;
        res.fallbacks += d.filter.fallback as usize;
        res.detours += d.detour as usize;
        let p = agent.state.position();
        res.path_length += dist(last, p);
        last = p;
        let success = !d.collided && reached(world, &agent.state);
        if stack.record_trajectory {
            trajectory.push(TrajectoryRow::new(t0, &before, &d, success));
        }
        if d.collided {
            res.outcome = Outcome::Collision;
            res.collision = Some(CollisionRecord {
                episode: 0,
                step: res.steps,
                observation: d.observation.clone(),
                action: d.filter.r,
            });
            log::debug!("seed {seed}: contact at t = {:.2} s, state {:?}", agent.t, agent.state);
            break;
        }
        if success {
            res.outcome = Outcome::Success;
            break;
        }
    }
    res.final_position = agent.state.position();
    if stack.record_trajectory {
        res.trajectory = Some(trajectory);
    }
    Ok(res)
}

/// Nominal stack for the ground robot with the noisy goal seeker.
pub fn default_unicycle_stack(filter: Option<BarrierContext>) -> Stack {
    Stack {
        model: AgentModel::Unicycle,
        radius: 0.15,
        boat: BoatParams::default(),
        sensor: SensorConfig::default(),
        policy: PolicySource::Scripted { kind: ScriptedKind::NoisyGoalSeeker, params: GoalSeekerParams::default() },
        filter,
        safe_set: None,
        escape: EscapeConfig::default(),
        nmpc: NmpcConfig::default(),
        disturbance: DisturbanceConfig::default(),
        control_dt: 0.05,
        plant_dt: 0.01,
        max_steps: 2000,
        record_trajectory: false,
    }
}
