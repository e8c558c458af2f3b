//! Interval reachability of policy networks, branch-and-bound enumeration of
//! unsafe observation regions, and the safe set built from them.

mod enumerate;
mod harvest;
mod interval;
mod safe_set;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{enumerate_unsafe, EnumerationConfig, EnumerationResult, EnumerationStats, UnsafeLeaf};
pub use harvest::{
    harvest_unsafe_pairs, observation_ranges, property_for, threat_side, CollisionRecord, HarvestConfig,
    ThreatSide,
};
pub use interval::{check_box, interval_forward, BoxVerdict, Halfplane, IntervalBox, OutputProperty};
pub use safe_set::{
    build_safe_set, density_map, match_observation, match_unsafe_regions, DensityMap, SafeRegion, SafeSet,
    UnsafeArea, UnsafeMatch,
};

use crate::policy::{Activation, Layer, NetworkError, OutputRanges, PolicyNetwork};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid property: {0}")]
    InvalidProperty(String),
    #[error("invalid enumeration settings: {0}")]
    InvalidConfig(String),
    #[error("box has {got} dimensions, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
}

/// A region `S_i` with its output property, as stored in property files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyFile {
    #[serde(rename = "box")]
    pub region: IntervalBox,
    pub halfplanes: Vec<Halfplane>,
}

impl PropertyFile {
    pub fn new(region: IntervalBox, property: &OutputProperty) -> Self {
        Self { region, halfplanes: property.halfplanes.clone() }
    }

    pub fn property(&self) -> Result<OutputProperty, VerificationError> {
        OutputProperty::new(self.halfplanes.clone())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VerificationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| VerificationError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let pf: PropertyFile = serde_json::from_str(&text)
            .map_err(|e| VerificationError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        pf.region.validate()?;
        pf.property()?;
        Ok(pf)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("property file serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Safe,
    Unsafe,
}

/// One leaf in the exported enumeration result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub verdict: Verdict,
    pub violation_rate: Option<f64>,
    pub counterexample: Option<Vec<f64>>,
}

/// Serialized form of an [`EnumerationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationExport {
    pub complete: bool,
    #[serde(rename = "box")]
    pub root: IntervalBox,
    pub halfplanes: Vec<Halfplane>,
    pub stats: EnumerationStats,
    pub leaves: Vec<LeafRecord>,
}

impl EnumerationResult {
    pub fn export(&self) -> EnumerationExport {
        let mut leaves: Vec<LeafRecord> = self
            .safe_leaves
            .iter()
            .map(|b| LeafRecord {
                lo: b.lo.clone(),
                hi: b.hi.clone(),
                verdict: Verdict::Safe,
                violation_rate: None,
                counterexample: None,
            })
            .collect();
        leaves.extend(self.unsafe_leaves.iter().map(|u| LeafRecord {
            lo: u.bx.lo.clone(),
            hi: u.bx.hi.clone(),
            verdict: Verdict::Unsafe,
            violation_rate: Some(u.violation_rate),
            counterexample: u.counterexample.clone(),
        }));
        EnumerationExport {
            complete: self.complete,
            root: self.root.clone(),
            halfplanes: self.property.halfplanes.clone(),
            stats: self.stats.clone(),
            leaves,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("enumeration result serializes")
    }

    pub fn from_export(e: EnumerationExport) -> Result<Self, VerificationError> {
        e.root.validate()?;
        let property = OutputProperty::new(e.halfplanes)?;
        let mut safe_leaves = Vec::new();
        let mut unsafe_leaves = Vec::new();
        for l in e.leaves {
            let bx = IntervalBox::new(l.lo, l.hi)?;
            match l.verdict {
                Verdict::Safe => safe_leaves.push(bx),
                Verdict::Unsafe => unsafe_leaves.push(UnsafeLeaf {
                    bx,
                    violation_rate: l.violation_rate.unwrap_or(1.0),
                    counterexample: l.counterexample,
                }),
            }
        }
        Ok(Self { root: e.root, property, safe_leaves, unsafe_leaves, stats: e.stats, complete: e.complete })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VerificationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| VerificationError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let e: EnumerationExport = serde_json::from_str(&text)
            .map_err(|e| VerificationError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_export(e)
    }
}

impl SafeSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, VerificationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| VerificationError::Io { path: path.display().to_string(), message: e.to_string() })?;
        serde_json::from_str(&text)
            .map_err(|e| VerificationError::Parse { path: path.display().to_string(), message: e.to_string() })
    }
}

/// Radius of the unsafe diamond of [`demo_network`].
pub const DEMO_RADIUS: f64 = 0.3;

/// Two-input demonstration network on `[0, 1]^2`. Its yaw output is
/// negative exactly inside the diamond `|x - 0.5| + |y - 0.5| < 0.3`, so the
/// property `w3 >= 0` is violated there and nowhere else.
pub fn demo_network() -> PolicyNetwork {
    let hidden = Layer {
        rows: 4,
        cols: 2,
        weights: vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        bias: vec![-0.5, 0.5, -0.5, 0.5],
        activation: Activation::Relu,
    };
    let head = Layer {
        rows: 2,
        cols: 4,
        weights: vec![0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0],
        bias: vec![0.0, -4.0 * DEMO_RADIUS],
        activation: Activation::Linear,
    };
    PolicyNetwork::new(2, OutputRanges::default(), None, vec![hidden, head]).expect("demo network is valid")
}

/// Property paired with [`demo_network`]: `w3 >= 0`.
pub fn demo_property() -> OutputProperty {
    OutputProperty::yaw_at_least(0.0)
}
