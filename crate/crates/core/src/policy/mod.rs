//! Navigation policies: feed-forward networks loaded from weight files,
//! observation construction and scripted fallbacks.

mod network;
mod observation;
mod scripted;

use thiserror::Error;

pub use network::{Activation, Layer, Normalization, OutputRanges, PolicyNetwork, OUTPUT_DIM};
pub use observation::{
    build_observation, AgentPose, ObservationVector, PLANAR_DIM, POSE_OFFSET, SPATIAL_DIM,
};
pub use scripted::{goal_seeker, scripted_policy, GoalSeekerParams, ScriptedKind, ScriptedPolicy};

use crate::dynamics::ReferenceCommand;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("cannot read network file {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse network file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("layer {layer}: dimension mismatch: {detail}")]
    DimensionMismatch { layer: usize, detail: String },
    #[error("layer {layer}: unknown activation {name:?}")]
    UnknownActivation { layer: usize, name: String },
    #[error("layer {layer}: non-finite {what} at index {index}")]
    NonFinite { layer: usize, what: &'static str, index: usize },
    #[error("output ranges must be finite with lo <= hi")]
    InvalidRanges,
    #[error("observation has {got} entries, network expects {expected}")]
    InputLength { expected: usize, got: usize },
}

/// Anything that maps an observation to a reference command.
#[allow(clippy::large_enum_variant)]
pub enum Policy {
    Network(PolicyNetwork),
    Scripted(ScriptedPolicy),
}

impl Policy {
    pub fn act(&mut self, obs: &ObservationVector) -> Result<ReferenceCommand, NetworkError> {
        match self {
            Policy::Network(net) => net.forward(&obs.to_vec()),
            Policy::Scripted(p) => Ok(p.act(obs)),
        }
    }
}
