//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safenav_core::policy::{Activation, PolicyNetwork};
use safenav_core::sim::{generate_world, WorldKind};
use safenav_core::{LinearConstraint, ScenarioConfig, World};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random constraints `a·x + b >= 0`, violated at the origin about half the time.
pub fn constraints(n: usize, seed: u64) -> Vec<LinearConstraint> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let t: f64 = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            LinearConstraint::new([t.cos(), t.sin()], r.random_range(-1.0..1.0))
        })
        .collect()
}

/// Planar-sized ReLU network with two hidden layers of 32 units.
pub fn planar_network(seed: u64) -> PolicyNetwork {
    PolicyNetwork::random(&mut rng(seed), 20, &[32, 32], Activation::Relu)
}

pub fn indoor_world(seed: u64) -> World {
    generate_world(WorldKind::IndoorCluttered, seed).expect("indoor world generates")
}

pub fn scenario(toml: &str) -> ScenarioConfig {
    ScenarioConfig::parse(toml, ".").expect("bench scenario parses")
}
