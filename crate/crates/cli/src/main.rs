mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mdpx", version, about = "Exploration-hardness analysis for tabular MDPs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Master seed; MDPX_SEED overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: standard output).
    #[arg(short = 'o', long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (default: available parallelism); MDPX_WORKERS overrides it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Analyse only this closed component of a reducible MDP (index into the
    /// closed-component listing).
    #[arg(long, global = true)]
    pub component: Option<usize>,
    /// Rescale transition rows to sum to one before validating the input.
    #[arg(long, global = true)]
    pub renormalize: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Chain,
    Grid,
    TwoRoom,
    Taxi,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Chain,
    Grid,
    Random,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a domain MDP as JSON.
    Generate(GenerateArgs),
    /// Stationary distribution, spectrum, Cheeger constant and symmetry.
    Analyze(AnalyzeArgs),
    /// Hardness report with every covering-length bound.
    Bounds(BoundsArgs),
    /// Monte Carlo covering-length estimate.
    Cover(CoverArgs),
    /// Exact lazy-walk reach probabilities against the spectral lower bound.
    Reach(ReachArgs),
    /// Explore-then-exploit Q-learning over several seeds.
    Learn(LearnArgs),
    /// Metric growth across a domain family.
    Sweep(SweepArgs),
    /// Full analysis plus bounds in one document.
    Report(BoundsArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: DomainKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// JSON file holding a list of `[x, y]` wall cells.
    #[arg(long)]
    pub walls: Option<PathBuf>,
    /// Goal cell as `x,y`; repeatable.
    #[arg(long, value_parser = parse_cell)]
    pub goal: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0.0)]
    pub slip: f64,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub actions: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub identical_actions: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub mdp: PathBuf,
    #[arg(long)]
    pub cheeger: bool,
    #[arg(long)]
    pub spectrum: bool,
    #[arg(long)]
    pub symmetry: bool,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    pub mdp: PathBuf,
    /// Multiplier of the action-variation bound.
    #[arg(long = "constant-c1")]
    pub c1: Option<f64>,
    /// Multiplier of the Q-learning T0 bound.
    #[arg(long = "constant-c2")]
    pub c2: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Skip the exhaustive Cheeger search.
    #[arg(long)]
    pub no_cheeger: bool,
}

#[derive(Args, Debug)]
pub struct CoverArgs {
    pub mdp: PathBuf,
    #[arg(long, default_value_t = 101)]
    pub trials: usize,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
}

#[derive(Args, Debug)]
pub struct ReachArgs {
    pub mdp: PathBuf,
    #[arg(long = "from")]
    pub from: usize,
    #[arg(long = "to")]
    pub to: usize,
    #[arg(long)]
    pub k: usize,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    pub mdp: PathBuf,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = mdpx_core::learn::DEFAULT_OMEGA)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Read `epsilon` as a fraction of `V_max`.
    #[arg(long)]
    pub relative: bool,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(value_enum)]
    pub family: FamilyKind,
    /// Inclusive range `A..B`.
    #[arg(long, value_parser = parse_range)]
    pub sizes: (usize, usize),
    #[arg(long)]
    pub metric: mdpx_core::sweep::Metric,
    #[arg(long, default_value_t = 2)]
    pub actions: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 101)]
    pub trials: usize,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((x, y))
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

/// Error that maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn env_override<T: std::str::FromStr>(name: &str) -> Result<Option<T>, UsageError> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| UsageError(format!("{name}={v:?} is not a valid value"))),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let mut cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    let overrides = env_override::<u64>("MDPX_SEED").and_then(|seed| Ok((seed, env_override::<usize>("MDPX_WORKERS")?)));
    match overrides {
        Ok((seed, workers)) => {
            if let Some(seed) = seed {
                cli.global.seed = seed;
            }
            if workers.is_some() {
                cli.global.workers = workers;
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    if let Some(n) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
