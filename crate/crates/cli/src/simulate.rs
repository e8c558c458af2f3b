use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use safenav_core::sim::{evaluate as run_eval, format_table, write_collisions_jsonl, write_trajectory_csv, EpisodeSpec, EvaluationReport, TrajectoryRow};
use safenav_core::ScenarioConfig;

use crate::{CliError, CliResult};

fn run_scenario(cfg: &ScenarioConfig, label: &str, filter: Option<bool>) -> CliResult<EvaluationReport> {
    let stack = cfg.stack(filter)?;
    let source = cfg.world_source()?;
    let spec = EpisodeSpec { episodes: cfg.run.episodes, group_seeds: cfg.run.seeds.clone() };
    log::info!("{label}: {} episodes x {} seed groups", spec.episodes, spec.group_seeds.len());
    let report = run_eval(label, &spec, &stack, |s| source.world_for(s))
        .map_err(|e| CliError::Runtime(anyhow::Error::new(e).context(format!("running {label}"))))?;
    if report.errors > 0 {
        log::warn!("{label}: {} episodes ended on a component error; results are partial", report.errors);
    }
    Ok(report)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn simulate(cfg: &ScenarioConfig) -> CliResult<()> {
    let label = if cfg.filter.enabled { "filtered" } else { "unfiltered" };
    let report = run_scenario(cfg, label, None)?;
    let out = &cfg.run.output_dir;
    create_dir(out)?;

    let table = format_table(std::slice::from_ref(&report));
    write_file(&out.join("metrics.txt"), &table)?;
    write_file(&out.join("metrics.json"), &pretty(&report.summary_json()))?;
    let episodes: Vec<_> = report.all_results().collect();
    write_file(&out.join("episodes.json"), &pretty(&episodes))?;

    let results: Vec<_> = report.all_results().cloned().collect();
    let path = out.join("collisions.jsonl");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_collisions_jsonl(&mut w, &results).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;

    if cfg.run.record_trajectories {
        let path = out.join("trajectories.csv");
        let logs: Vec<(usize, &[TrajectoryRow])> =
            results.iter().enumerate().filter_map(|(i, r)| r.trajectory.as_deref().map(|t| (i, t))).collect();
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trajectory_csv(BufWriter::new(f), &logs).with_context(|| format!("writing {}", path.display()))?;
    }

    print!("{table}");
    if let Some(h) = report.min_h {
        println!("min h = {h:.6}");
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

pub fn evaluate(cfgs: &[ScenarioConfig], names: &[String]) -> CliResult<()> {
    let mut reports = Vec::new();
    for (cfg, name) in cfgs.iter().zip(names) {
        for (filter, tag) in [(false, "unfiltered"), (true, "filtered")] {
            reports.push(run_scenario(cfg, &format!("{name}/{tag}"), Some(filter))?);
        }
    }
    let out = &cfgs[0].run.output_dir;
    create_dir(out)?;
    let table = format_table(&reports);
    write_file(&out.join("evaluation.txt"), &table)?;
    let summary: Vec<_> = reports.iter().map(EvaluationReport::summary_json).collect();
    write_file(&out.join("evaluation.json"), &pretty(&summary))?;
    print!("{table}");
    println!("outputs written to {}", out.display());
    Ok(())
}
