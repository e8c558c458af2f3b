use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{Point, World};

/// Number of beam cones in an observation.
pub const CONES: usize = 15;
/// Angular width of one cone.
pub const CONE_WIDTH: f64 = 2.0 * std::f64::consts::PI / CONES as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Maximum range, m. Rays without a return read this value.
    pub max_range: f64,
    pub rays_per_cone: usize,
    /// Standard deviation of zero-mean Gaussian range noise, m.
    pub noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { max_range: 3.5, rays_per_cone: 5, noise_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// Angle relative to the agent heading, counter-clockwise.
    pub angle: f64,
    pub range: f64,
    pub obstacle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub origin: Point,
    pub heading: f64,
    pub max_range: f64,
    pub rays_per_cone: usize,
    pub rays: Vec<Ray>,
}

/// A sensed obstacle surface point in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitPoint {
    pub point: Point,
    pub range: f64,
    pub obstacle: usize,
}

/// Ray angle offsets: cone `k` is centred `k w` counter-clockwise from the
/// heading (cone 0 looks straight ahead), with rays at the centres of equal
/// sub-sectors.
pub fn ray_angles(rays_per_cone: usize) -> Vec<f64> {
    let step = CONE_WIDTH / rays_per_cone as f64;
    (0..CONES)
        .flat_map(|k| {
            (0..rays_per_cone).map(move |j| (k as f64 - 0.5) * CONE_WIDTH + (j as f64 + 0.5) * step)
        })
        .collect()
}

/// Centre angle of cone `k` relative to the heading, wrapped to `(-pi, pi]`.
pub fn cone_center(k: usize) -> f64 {
    crate::angle::wrap(k as f64 * CONE_WIDTH)
}

/// Casts all rays from `origin`. With `noise` the ranges are perturbed and
/// clipped back into `[0, max_range]`.
pub fn scan<R: Rng>(
    world: &World,
    origin: Point,
    heading: f64,
    cfg: &SensorConfig,
    noise: Option<&mut R>,
) -> Scan {
    let mut rays: Vec<Ray> = ray_angles(cfg.rays_per_cone)
        .into_iter()
        .map(|angle| {
            let a = heading + angle;
            let dir = [a.cos(), a.sin()];
            match world.raycast(origin, dir, cfg.max_range) {
                Some((t, id)) => Ray { angle, range: t, obstacle: Some(id) },
                None => Ray { angle, range: cfg.max_range, obstacle: None },
            }
        })
        .collect();
    if let Some(rng) = noise {
        if cfg.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma checked positive");
            for r in &mut rays {
                r.range = (r.range + normal.sample(rng)).clamp(0.0, cfg.max_range);
            }
        }
    }
    Scan { origin, heading, max_range: cfg.max_range, rays_per_cone: cfg.rays_per_cone, rays }
}

impl Scan {
    /// Mean clipped range per cone.
    pub fn cone_means(&self) -> [f64; CONES] {
        let mut out = [0.0; CONES];
        for (k, chunk) in self.rays.chunks(self.rays_per_cone).enumerate() {
            out[k] = chunk.iter().map(|r| r.range.clamp(0.0, self.max_range)).sum::<f64>()
                / chunk.len() as f64;
        }
        out
    }

    /// World-frame endpoints of rays that returned a hit.
    pub fn hit_points(&self) -> Vec<HitPoint> {
        self.rays
            .iter()
            .filter_map(|r| {
                let id = r.obstacle?;
                let a = self.heading + r.angle;
                Some(HitPoint {
                    point: [self.origin[0] + r.range * a.cos(), self.origin[1] + r.range * a.sin()],
                    range: r.range,
                    obstacle: id,
                })
            })
            .collect()
    }
}
