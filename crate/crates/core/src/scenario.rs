//! Scenario files: one TOML document describing the world, the agent, the
//! policy, the filter, the controller, disturbances, enumeration inputs and
//! run settings. Relative paths are resolved against the file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::CbfConfig;
use crate::dynamics::BoatParams;
use crate::nmpc::NmpcConfig;
use crate::policy::{GoalSeekerParams, PolicyNetwork, ScriptedKind};
use crate::sim::sensor::SensorConfig;
use crate::sim::{
    generate_world, AgentModel, DisturbanceConfig, EscapeConfig, PolicySource, SimError, Stack, World, WorldKind,
};
use crate::verification::{EnumerationConfig, HarvestConfig, SafeSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{what} not found: {path}")]
    MissingFile { what: &'static str, path: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    /// Procedural layout, used when no file is given.
    pub kind: Option<WorldKind>,
    /// World file (TOML or JSON). Takes precedence over `kind`.
    pub file: Option<PathBuf>,
    /// Fixed world seed for procedural layouts. Without it every episode
    /// gets its own world.
    pub seed: Option<u64>,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self { kind: Some(WorldKind::IndoorCluttered), file: None, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub model: AgentModel,
    /// Collision radius, m. Defaults to 0.15 for the unicycle and 0.5 for
    /// the boat.
    pub radius: Option<f64>,
    /// Unicycle control period, s.
    pub control_dt: f64,
    /// Unicycle integration step, s.
    pub plant_dt: f64,
    pub boat: BoatParams,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self { model: AgentModel::Unicycle, radius: None, control_dt: 0.05, plant_dt: 0.01, boat: BoatParams::default() }
    }
}

impl AgentSection {
    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(match self.model {
            AgentModel::Unicycle => 0.15,
            AgentModel::Boat => 0.5,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    /// Scripted policy, used when no weights are given.
    pub kind: Option<ScriptedKind>,
    /// Network weight file (JSON or TOML). Takes precedence over `kind`.
    pub weights: Option<PathBuf>,
    pub params: GoalSeekerParams,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self { kind: Some(ScriptedKind::NoisyGoalSeeker), weights: None, params: GoalSeekerParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerationSection {
    /// Network to verify; defaults to `policy.weights`. `demo` selects the
    /// built-in two-input network.
    pub network: Option<PathBuf>,
    pub demo: bool,
    /// Property files, each one region and one output property.
    pub properties: Vec<PathBuf>,
    /// Collision records (JSON lines) to harvest regions from.
    pub collisions: Option<PathBuf>,
    pub harvest: HarvestConfig,
    /// Input dimensions that hold the agent position. Defaults to the pose
    /// slots of the observation.
    pub position_dims: Option<[usize; 2]>,
    /// Cells per side of the density map.
    pub density_resolution: usize,
    pub search: EnumerationConfig,
}

impl Default for EnumerationSection {
    fn default() -> Self {
        Self {
            network: None,
            demo: false,
            properties: Vec::new(),
            collisions: None,
            harvest: HarvestConfig::default(),
            position_dims: None,
            density_resolution: 64,
            search: EnumerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub episodes: usize,
    /// One seed group per entry; rates are reported as mean and standard
    /// deviation across groups.
    pub seeds: Vec<u64>,
    pub max_steps: usize,
    pub output_dir: PathBuf,
    pub record_trajectories: bool,
    /// Enumerated safe set used by the inflated safety distance.
    pub safe_set: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            episodes: 100,
            seeds: vec![0],
            max_steps: 2000,
            output_dir: PathBuf::from("out"),
            record_trajectories: true,
            safe_set: None,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub world: WorldSection,
    pub agent: AgentSection,
    pub sensor: SensorConfig,
    pub policy: PolicySection,
    pub filter: CbfConfig,
    pub escape: EscapeConfig,
    pub nmpc: Option<NmpcConfig>,
    pub disturbance: DisturbanceConfig,
    pub enumeration: EnumerationSection,
    pub run: RunSection,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            world: WorldSection::default(),
            agent: AgentSection::default(),
            sensor: SensorConfig::default(),
            policy: PolicySection::default(),
            filter: CbfConfig::default(),
            escape: EscapeConfig::default(),
            nmpc: None,
            disturbance: DisturbanceConfig::default(),
            enumeration: EnumerationSection::default(),
            run: RunSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Where episode worlds come from.
#[derive(Debug, Clone)]
pub enum WorldSource {
    Fixed(Arc<World>),
    PerEpisode(WorldKind),
}

impl WorldSource {
    pub fn world_for(&self, episode_seed: u64) -> Result<World, SimError> {
        match self {
            Self::Fixed(w) => Ok((**w).clone()),
            Self::PerEpisode(kind) => generate_world(*kind, episode_seed),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Reads a world file, TOML or JSON by extension.
pub fn load_world(path: &Path) -> Result<World, ConfigError> {
    let text = read(path)?;
    let parse_err = |m: String| ConfigError::Parse { path: path.display().to_string(), message: m };
    let world: World = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    };
    world.validate().map_err(|e| parse_err(e.to_string()))?;
    Ok(world)
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.display().to_string(), message },
            other => other,
        })?;
        Ok(cfg)
    }

    /// Parses and validates a scenario; relative paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: "<scenario>".into(), message: e.to_string() })?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn require(&self, p: &Path, what: &'static str) -> Result<PathBuf, ConfigError> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(full)
        } else {
            Err(ConfigError::MissingFile { what, path: full.display().to_string() })
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match (&self.world.kind, &self.world.file) {
            (None, None) => return bad("world needs a kind or a file"),
            (_, Some(f)) => {
                self.require(f, "world file")?;
            }
            _ => {}
        }
        match (&self.policy.kind, &self.policy.weights) {
            (None, None) => return bad("policy needs a kind or a weights file"),
            (_, Some(w)) => {
                self.require(w, "weights file")?;
            }
            _ => {}
        }
        if self.agent.model == AgentModel::Boat && self.nmpc.is_none() {
            return bad("the boat needs an [nmpc] section");
        }
        if let Some(n) = &self.nmpc {
            n.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if !(self.agent.radius() > 0.0) {
            return bad("agent.radius must be positive");
        }
        if !(self.agent.plant_dt > 0.0 && self.agent.plant_dt <= self.agent.control_dt) {
            return bad("need 0 < agent.plant_dt <= agent.control_dt");
        }
        self.agent.boat.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.filter.validate().map_err(ConfigError::Invalid)?;
        if self.sensor.rays_per_cone == 0 || !(self.sensor.max_range > 0.0) || !(self.sensor.noise_sigma >= 0.0) {
            return bad("sensor needs rays_per_cone >= 1, max_range > 0 and noise_sigma >= 0");
        }
        if !(self.disturbance.gust_sigma >= 0.0) || self.disturbance.drift.iter().any(|d| !d.is_finite()) {
            return bad("disturbance needs finite drift and gust_sigma >= 0");
        }
        if self.run.episodes == 0 || self.run.seeds.is_empty() || self.run.max_steps == 0 {
            return bad("run needs episodes >= 1, at least one seed and max_steps >= 1");
        }
        if let Some(s) = &self.run.safe_set {
            self.require(s, "safe set")?;
        }
        let e = &self.enumeration;
        if let Some(n) = &e.network {
            self.require(n, "network file")?;
        }
        for p in &e.properties {
            self.require(p, "property file")?;
        }
        if let Some(c) = &e.collisions {
            self.require(c, "collision log")?;
        }
        e.search.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        if e.density_resolution == 0 {
            return bad("enumeration.density_resolution must be positive");
        }
        Ok(())
    }

    /// The configuration with every default written out. Reloading the
    /// output gives back the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Copy with every file path made absolute, so the dump reloads to the
    /// same configuration from any directory.
    pub fn absolutized(&self) -> Self {
        let mut c = self.clone();
        let abs = |p: &mut PathBuf| *p = std::path::absolute(self.resolve(p)).unwrap_or_else(|_| self.resolve(p));
        c.world.file.as_mut().map(abs);
        c.policy.weights.as_mut().map(abs);
        c.enumeration.network.as_mut().map(abs);
        c.enumeration.collisions.as_mut().map(abs);
        c.enumeration.properties.iter_mut().for_each(abs);
        c.run.safe_set.as_mut().map(abs);
        abs(&mut c.run.output_dir);
        c
    }

    pub fn world_source(&self) -> Result<WorldSource, ConfigError> {
        match (&self.world.kind, &self.world.file) {
            (_, Some(f)) => Ok(WorldSource::Fixed(Arc::new(load_world(&self.resolve(f))?))),
            (Some(kind), None) => match self.world.seed {
                Some(seed) => generate_world(*kind, seed)
                    .map(|w| WorldSource::Fixed(Arc::new(w)))
                    .map_err(|e| ConfigError::Invalid(e.to_string())),
                None => Ok(WorldSource::PerEpisode(*kind)),
            },
            (None, None) => Err(ConfigError::Invalid("world needs a kind or a file".into())),
        }
    }

    pub fn load_network(&self, path: &Path) -> Result<PolicyNetwork, ConfigError> {
        let full = self.require(path, "weights file")?;
        PolicyNetwork::load(&full).map_err(|e| ConfigError::Parse { path: full.display().to_string(), message: e.to_string() })
    }

    /// Assembles the simulation stack. `filter_override` replaces
    /// `filter.enabled` when given.
    pub fn stack(&self, filter_override: Option<bool>) -> Result<Stack, ConfigError> {
        let radius = self.agent.radius();
        let policy = match (&self.policy.kind, &self.policy.weights) {
            (_, Some(w)) => PolicySource::Network(Arc::new(self.load_network(w)?)),
            (Some(kind), None) => PolicySource::Scripted { kind: *kind, params: self.policy.params.clone() },
            (None, None) => return Err(ConfigError::Invalid("policy needs a kind or a weights file".into())),
        };
        let enabled = filter_override.unwrap_or(self.filter.enabled);
        let safe_set = match &self.run.safe_set {
            Some(p) => {
                let full = self.require(p, "safe set")?;
                let set = SafeSet::load(&full)
                    .map_err(|e| ConfigError::Parse { path: full.display().to_string(), message: e.to_string() })?;
                Some(Arc::new(set))
            }
            None => None,
        };
        let stack = Stack {
            model: self.agent.model,
            radius,
            boat: self.agent.boat.clone(),
            sensor: self.sensor.clone(),
            policy,
            filter: enabled.then(|| self.filter.context(radius, self.agent.boat.theta_max)),
            safe_set,
            escape: self.escape.clone(),
            nmpc: self.nmpc.clone().unwrap_or_default(),
            disturbance: self.disturbance.clone(),
            control_dt: self.agent.control_dt,
            plant_dt: self.agent.plant_dt,
            max_steps: self.run.max_steps,
            record_trajectory: self.run.record_trajectories,
        };
        stack.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(stack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_document() {
        let cfg = ScenarioConfig::parse("", ".").unwrap();
        assert_eq!(cfg.agent.radius(), 0.15);
        assert_eq!(cfg.run.max_steps, 2000);
        let stack = cfg.stack(None).unwrap();
        assert!((stack.filter.unwrap().sigma - 0.18).abs() < 1e-12);
        assert!(cfg.stack(Some(false)).unwrap().filter.is_none());
    }

    #[test]
    fn boat_requires_nmpc() {
        let err = ScenarioConfig::parse("[agent]\nmodel = \"boat\"\n", ".").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        let ok = ScenarioConfig::parse("[agent]\nmodel = \"boat\"\n[nmpc]\nhorizon = 8\n", ".").unwrap();
        assert_eq!(ok.agent.radius(), 0.5);
        assert_eq!(ok.nmpc.unwrap().horizon, 8);
    }

    #[test]
    fn missing_weights_named() {
        let err = ScenarioConfig::parse("[policy]\nweights = \"nope/w.json\"\n", "/tmp/x").unwrap_err();
        match err {
            ConfigError::MissingFile { path, .. } => assert!(path.ends_with("nope/w.json")),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::parse("[filter]\ngama = 2.0\n", ".").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let text = "[world]\nkind = \"aquatic_coastline\"\nseed = 4\n[agent]\nmodel = \"boat\"\n[nmpc]\n[filter]\nsigma = 0.7\n[run]\nseeds = [1, 2, 3]\n";
        let cfg = ScenarioConfig::parse(text, ".").unwrap();
        let dumped = cfg.to_toml();
        let back = ScenarioConfig::parse(&dumped, ".").unwrap();
        assert_eq!(cfg, back);
        assert_eq!(dumped, back.to_toml());
    }

    #[test]
    fn relative_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("nets")).unwrap();
        std::fs::write(dir.path().join("nets/p.json"), crate::verification::demo_network().to_json()).unwrap();
        std::fs::write(dir.path().join("s.toml"), "[enumeration]\nnetwork = \"nets/p.json\"\n").unwrap();
        let cfg = ScenarioConfig::load(dir.path().join("s.toml")).unwrap();
        assert_eq!(cfg.resolve(Path::new("nets/p.json")), dir.path().join("nets/p.json"));
    }
}
