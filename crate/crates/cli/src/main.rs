//! `safenav`: run episodes, enumerate unsafe regions, compare filtered and
//! unfiltered stacks, and emit plot data.

mod enumerate;
mod plot;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use safenav_core::scenario::ConfigError;
use safenav_core::ScenarioConfig;

#[derive(Parser, Debug)]
#[command(name = "safenav", version, about = "Safe mapless navigation: simulation, verification and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the episodes of one scenario and write logs and metrics.
    Simulate(RunArgs),
    /// Enumerate unsafe input regions of the policy network.
    Enumerate(RunArgs),
    /// Run each scenario with the filter off and on and tabulate the rates.
    Evaluate(EvaluateArgs),
    /// Turn a trajectory CSV into plot series.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Episodes per seed group.
    #[arg(long)]
    episodes: Option<usize>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: `run.output_dir` of the scenario).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the configuration after overrides as TOML and exit.
    #[arg(long)]
    dump_effective_config: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    filter: Option<Switch>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Scenario files; each one becomes a pair of table rows.
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Tracking,
    Trajectory,
    #[value(name = "h_profile")]
    HProfile,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes, mapped onto exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Loads a scenario and applies the command-line overrides.
fn load_config(path: &Path, filter: Option<Switch>, o: &Overrides) -> CliResult<ScenarioConfig> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("scenario file not found: {}", path.display())));
    }
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(n) = o.episodes {
        cfg.run.episodes = n;
    }
    if let Some(s) = o.seed {
        cfg.run.seeds = vec![s];
        cfg.enumeration.search.seed = s;
    }
    if let Some(j) = o.jobs {
        cfg.run.jobs = j;
    }
    if let Some(out) = &o.out {
        cfg.run.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
    }
    if let Some(f) = filter {
        cfg.filter.enabled = f == Switch::On;
    }
    cfg.validate()?;
    Ok(cfg.absolutized())
}

fn init_pool(jobs: usize) -> CliResult<()> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("cannot start {jobs} worker threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = load_config(&a.config, a.filter, &a.overrides)?;
            if a.overrides.dump_effective_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            init_pool(cfg.run.jobs)?;
            simulate::simulate(&cfg)
        }
        Command::Enumerate(a) => {
            let cfg = load_config(&a.config, a.filter, &a.overrides)?;
            if a.overrides.dump_effective_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            init_pool(cfg.run.jobs)?;
            enumerate::enumerate(&cfg)
        }
        Command::Evaluate(a) => {
            let cfgs: Vec<ScenarioConfig> =
                a.config.iter().map(|p| load_config(p, None, &a.overrides)).collect::<Result<_, _>>()?;
            if a.overrides.dump_effective_config {
                for c in &cfgs {
                    print!("{}", c.to_toml());
                }
                return Ok(());
            }
            init_pool(cfgs[0].run.jobs)?;
            let names: Vec<String> = a
                .config
                .iter()
                .map(|p| p.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned()))
                .collect();
            simulate::evaluate(&cfgs, &names)
        }
        Command::Plot(a) => plot::plot(&a.input, a.kind, a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAFE_NAV_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
