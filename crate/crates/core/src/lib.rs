//! Safe mapless navigation stack.
//!
//! The pipeline is hierarchical: a learned (or scripted) policy proposes a
//! reference `[v1, w3]`, a control-barrier-function QP minimally corrects it
//! using obstacles seen by the range sensor and unsafe regions enumerated
//! offline from the policy network, and a low-level controller (NMPC for the
//! aquatic drone, direct velocity application for the unicycle) drives the
//! plant.
//!
//! Module map:
//! - [`dynamics`]: unicycle and 6-DOF boat models, RK4 integration.
//! - [`policy`]: feed-forward networks, observations, scripted policies.
//! - [`verification`]: interval reachability, unsafe-region enumeration,
//!   safe sets and density maps.
//! - [`cbf`]: barrier function, QP safety filter.
//! - [`nmpc`]: single-shooting NMPC for thrust commands.
//! - [`sim`]: worlds, range sensing, episodes and evaluation.
//! - [`scenario`]: scenario configuration files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod cbf;
pub mod dynamics;
pub mod error;
pub mod nmpc;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod verification;

pub use cbf::{BarrierContext, CbfConfig, DSafeMode, FilterOutput, LinearConstraint};
pub use dynamics::{
    BoatParams, BoatState, ReferenceCommand, ThrustCommand, UnicycleState,
};
pub use error::{Error, Result};
pub use nmpc::{NmpcConfig, NmpcSolution, NmpcSolver};
pub use policy::{ObservationVector, PolicyNetwork};
pub use scenario::ScenarioConfig;
pub use sim::{EpisodeResult, Outcome, World};
pub use verification::{EnumerationResult, IntervalBox, OutputProperty, SafeSet};
