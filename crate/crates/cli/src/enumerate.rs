use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use safenav_core::policy::PLANAR_DIM;
use safenav_core::sim::world::Rect;
use safenav_core::verification::{
    build_safe_set, demo_network, demo_property, density_map, enumerate_unsafe, harvest_unsafe_pairs,
    observation_ranges, CollisionRecord, PropertyFile, SafeSet,
};
use safenav_core::{IntervalBox, OutputProperty, PolicyNetwork, ScenarioConfig};
use serde_json::json;

use crate::{CliError, CliResult};

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn network(cfg: &ScenarioConfig) -> CliResult<PolicyNetwork> {
    let e = &cfg.enumeration;
    if e.demo {
        return Ok(demo_network());
    }
    match e.network.as_ref().or(cfg.policy.weights.as_ref()) {
        Some(p) => Ok(cfg.load_network(p)?),
        None => Err(usage("enumeration needs `enumeration.network`, `policy.weights` or `enumeration.demo = true`")),
    }
}

fn read_collisions(path: &Path) -> CliResult<Vec<CollisionRecord>> {
    let f = fs::File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Regions and properties to verify: property files first, then harvested
/// collision neighbourhoods, then the demo pair when nothing else is given.
fn pairs(cfg: &ScenarioConfig, net: &PolicyNetwork) -> CliResult<Vec<(IntervalBox, OutputProperty)>> {
    let e = &cfg.enumeration;
    let mut out = Vec::new();
    for p in &e.properties {
        let full = cfg.resolve(p);
        let pf = PropertyFile::load(&full).map_err(|err| usage(err.to_string()))?;
        let prop = pf.property().map_err(|err| usage(format!("{}: {err}", full.display())))?;
        out.push((pf.region, prop));
    }
    if let Some(c) = &e.collisions {
        let records = read_collisions(&cfg.resolve(c))?;
        let pose_len = if net.input_dim == PLANAR_DIM { 3 } else { 6 };
        let extent = match cfg.world_source()?.world_for(0) {
            Ok(w) => w.bounds.width().max(w.bounds.height()),
            Err(err) => return Err(CliError::Runtime(err.into())),
        };
        let ranges = observation_ranges(pose_len, cfg.sensor.max_range, extent);
        let harvested = harvest_unsafe_pairs(&records, &ranges, &e.harvest).map_err(|err| usage(err.to_string()))?;
        log::info!("harvested {} regions from {} collision records", harvested.len(), records.len());
        out.extend(harvested);
    }
    if out.is_empty() && e.demo {
        let root = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("unit square");
        out.push((root, demo_property()));
    }
    if out.is_empty() {
        return Err(usage("nothing to enumerate: give `enumeration.properties` or `enumeration.collisions`"));
    }
    Ok(out)
}

fn footprint_bounds(set: &SafeSet) -> Rect {
    let mut b = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in &set.regions {
        let f = set.footprint(&r.root);
        b = Rect::new(b.x_min.min(f.x_min), b.y_min.min(f.y_min), b.x_max.max(f.x_max), b.y_max.max(f.y_max));
    }
    b
}

pub fn enumerate(cfg: &ScenarioConfig) -> CliResult<()> {
    let net = network(cfg)?;
    let pairs = pairs(cfg, &net)?;
    let e = &cfg.enumeration;
    let position_dims = e.position_dims.unwrap_or(if net.input_dim == 2 { [0, 1] } else { SafeSet::default_position_dims() });
    if position_dims.iter().any(|&d| d >= net.input_dim) {
        return Err(usage(format!("position_dims {position_dims:?} out of range for {} inputs", net.input_dim)));
    }
    let out = cfg.run.output_dir.join("enumeration");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut results = Vec::with_capacity(pairs.len());
    let mut rows = Vec::new();
    for (i, (root, prop)) in pairs.iter().enumerate() {
        let res = enumerate_unsafe(&net, root, prop, &e.search).map_err(|err| {
            if root.dim() != net.input_dim {
                usage(format!("region {i}: {err}"))
            } else {
                CliError::Runtime(anyhow::Error::new(err).context(format!("enumerating region {i}")))
            }
        })?;
        let name = format!("region_{i:03}.json");
        fs::write(out.join(&name), res.to_json() + "\n").with_context(|| format!("writing {name}"))?;
        rows.push(json!({
            "file": name,
            "complete": res.complete,
            "safe_leaves": res.safe_leaves.len(),
            "unsafe_leaves": res.unsafe_leaves.len(),
            "safe_fraction": res.safe_fraction(),
            "stats": res.stats,
        }));
        if !res.complete {
            log::warn!("region {i}: leaf budget exhausted, result is incomplete");
        }
        results.push(res);
    }

    let set = build_safe_set(&results, position_dims).map_err(|err| CliError::Runtime(err.into()))?;
    fs::write(out.join("safe_set.json"), set.to_json() + "\n").context("writing safe_set.json")?;
    let map = density_map(&set, footprint_bounds(&set), e.density_resolution).map_err(|err| CliError::Runtime(err.into()))?;
    fs::write(out.join("density.txt"), map.to_text()).context("writing density.txt")?;

    let complete = results.iter().all(|r| r.complete);
    let summary = json!({
        "complete": complete,
        "incomplete": !complete,
        "regions": rows,
        "unsafe_areas": set.unsafe_count(),
        "unsafe_mass": map.total_mass(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(out.join("summary.json"), &text).context("writing summary.json")?;

    for (i, r) in results.iter().enumerate() {
        println!(
            "region {i}: {} safe leaves, {} unsafe leaves, safe fraction {:.4}{}",
            r.safe_leaves.len(),
            r.unsafe_leaves.len(),
            r.safe_fraction(),
            if r.complete { "" } else { " (incomplete)" }
        );
    }
    if !complete {
        println!("incomplete: leaf budget exhausted; unexplored boxes are reported unsafe");
    }
    println!("outputs written to {}", out.display());
    Ok(())
}
