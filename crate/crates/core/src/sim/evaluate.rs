use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Stack};
use super::{EpisodeResult, Outcome, SimError, World};
use crate::rng::derive_seed;

/// Which worlds and seeds to run: `episodes` episodes for each group seed.
/// Episode `i` of group `s` uses seed `derive_seed(s, i)` for both its
/// world and its agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episodes: usize,
    pub group_seeds: Vec<u64>,
}

impl EpisodeSpec {
    pub fn episode_seed(group: u64, index: usize) -> u64 {
        derive_seed(group, index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    /// Percent.
    pub mean: f64,
    /// Population standard deviation across seed groups, percent.
    pub std: f64,
}

impl RateSummary {
    fn of(rates: &[f64]) -> Self {
        let n = rates.len().max(1) as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for RateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} ± {:.1}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGroup {
    pub seed: u64,
    pub success: f64,
    pub collision: f64,
    pub timeout: f64,
    pub results: Vec<EpisodeResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub label: String,
    pub episodes: usize,
    pub groups: Vec<SeedGroup>,
    pub success: RateSummary,
    pub collision: RateSummary,
    pub timeout: RateSummary,
    /// Smallest barrier value across all episodes, if the filter ran.
    pub min_h: Option<f64>,
    /// Episodes that ended on a component error.
    pub errors: usize,
}

fn percent(results: &[EpisodeResult], o: Outcome) -> f64 {
    100.0 * results.iter().filter(|r| r.outcome == o).count() as f64 / results.len().max(1) as f64
}

/// Runs every episode of `spec` on the current rayon pool. `world_for`
/// builds the world from the episode seed.
pub fn evaluate<F>(label: &str, spec: &EpisodeSpec, stack: &Stack, world_for: F) -> Result<EvaluationReport, SimError>
where
    F: Fn(u64) -> Result<World, SimError> + Sync,
{
    if spec.episodes == 0 || spec.group_seeds.is_empty() {
        return Err(SimError::InvalidStack("need at least one episode and one seed".into()));
    }
    stack.validate()?;
    let jobs: Vec<(usize, u64)> =
        (0..spec.group_seeds.len()).flat_map(|g| (0..spec.episodes).map(move |i| (g, i as u64))).collect();
    let results: Vec<Result<EpisodeResult, SimError>> = jobs
        .par_iter()
        .map(|&(g, i)| {
            let seed = EpisodeSpec::episode_seed(spec.group_seeds[g], i as usize);
            let world = world_for(seed)?;
            run_episode(&world, stack, seed)
        })
        .collect();
    let mut groups: Vec<SeedGroup> = Vec::with_capacity(spec.group_seeds.len());
    let mut it = results.into_iter();
    for &seed in &spec.group_seeds {
        let results: Vec<EpisodeResult> = it.by_ref().take(spec.episodes).collect::<Result<_, _>>()?;
        groups.push(SeedGroup {
            seed,
            success: percent(&results, Outcome::Success),
            collision: percent(&results, Outcome::Collision),
            timeout: percent(&results, Outcome::Timeout),
            results,
        });
    }
    let col = |f: fn(&SeedGroup) -> f64| RateSummary::of(&groups.iter().map(f).collect::<Vec<_>>());
    let all = || groups.iter().flat_map(|g| &g.results);
    let min_h = all().filter_map(|r| r.min_h).reduce(f64::min);
    Ok(EvaluationReport {
        label: label.to_string(),
        episodes: spec.episodes,
        success: col(|g| g.success),
        collision: col(|g| g.collision),
        timeout: col(|g| g.timeout),
        min_h,
        errors: all().filter(|r| r.error.is_some()).count(),
        groups,
    })
}

impl EvaluationReport {
    pub fn all_results(&self) -> impl Iterator<Item = &EpisodeResult> {
        self.groups.iter().flat_map(|g| &g.results)
    }

    /// Metrics without per-episode detail.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "episodes": self.episodes,
            "seeds": self.groups.iter().map(|g| g.seed).collect::<Vec<_>>(),
            "success": self.success,
            "collision": self.collision,
            "timeout": self.timeout,
            "per_seed": self.groups.iter().map(|g| serde_json::json!({
                "seed": g.seed, "success": g.success, "collision": g.collision, "timeout": g.timeout,
            })).collect::<Vec<_>>(),
            "min_h": self.min_h,
            "errors": self.errors,
        })
    }
}

/// Plain-text table in the layout of the evaluation tables: one row per
/// configuration, rates as `mean ± std` percent.
pub fn format_table(reports: &[EvaluationReport]) -> String {
    let mut s = format!("{:<16} {:>8} {:>14} {:>14} {:>14}\n", "config", "episodes", "success(%)", "collision(%)", "timeout(%)");
    for r in reports {
        s += &format!(
            "{:<16} {:>8} {:>14} {:>14} {:>14}\n",
            r.label,
            r.episodes * r.groups.len(),
            r.success.to_string(),
            r.collision.to_string(),
            r.timeout.to_string()
        );
    }
    s
}
