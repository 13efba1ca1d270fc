//! Command-line front end for building and evaluating region-based radio maps.
//!
//! Every command is a pure function of its input files, its resolved configuration
//! and the seed, so reruns produce byte-identical outputs.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod error;
pub mod formats;

use error::{CliError, CliResult, EXIT_INPUT, EXIT_OK};

/// Environment variable that replaces the seed of a spec or check.
pub const SEED_ENV: &str = "RADIOMAP_SEED";

#[derive(Debug, Parser)]
#[command(name = "radiomap", version, about = "Region-based radio maps from sequential RSS measurements")]
pub struct Cli {
    /// Cap on worker threads used by the numerical kernels.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Print the resolved configuration as JSON and exit without running.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset bundle from a spec file.
    Generate(GenerateArgs),
    /// Segment a dataset, fit region features and match clusters to regions.
    Build(BuildArgs),
    /// Assign query RSS vectors to regions of a radio map.
    Localize(LocalizeArgs),
    /// Score a radio map (and optional assignments) against dataset truth.
    Evaluate(EvaluateArgs),
    /// Run a named property check.
    Theory(TheoryArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Spec JSON file.
    #[arg(long)]
    pub spec: std::path::PathBuf,
    /// Output directory (created when missing).
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: std::path::PathBuf,
    /// Build configuration JSON; flags take precedence over it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Output directory; defaults to the dataset directory.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Use plain merge-and-split on the mean-only cost.
    #[arg(long, conflicts_with = "segmenter")]
    pub d0: bool,
    #[arg(long)]
    pub segmenter: Option<String>,
    #[arg(long)]
    pub matcher: Option<String>,
    /// Slope of the smooth window.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Use the exact rectangular window.
    #[arg(long, conflicts_with = "beta")]
    pub rectangle: bool,
    /// Start from a random segmentation drawn with this seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Radio map JSON written by `build`.
    #[arg(long)]
    pub map: std::path::PathBuf,
    /// Query CSV with columns `s1..sD` (a leading `t` column is ignored).
    #[arg(long)]
    pub queries: std::path::PathBuf,
    /// Assignments CSV to write.
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: std::path::PathBuf,
    /// Radio map JSON; defaults to `radiomap.json` in the dataset directory.
    #[arg(long)]
    pub map: Option<std::path::PathBuf>,
    /// Assignments CSV from `localize`, scored against the dataset's query regions.
    #[arg(long)]
    pub assignments: Option<std::path::PathBuf>,
    /// Per-boundary slack of the segmentation error, as a fraction of N.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Report JSON to write; defaults to `report.json` in the dataset directory.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Check name; see `--list`.
    #[arg(required_unless_present = "list")]
    pub check: Option<String>,
    /// List the available checks.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub sensors: Option<usize>,
    #[arg(long)]
    pub regions: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

/// Process-level settings shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub seed_override: Option<u64>,
    pub print_config: bool,
}

impl Context {
    pub fn from_env() -> CliResult<Self> {
        let seed_override = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("{SEED_ENV}=`{v}` is not a nonnegative integer")))?,
            ),
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => return Err(CliError::input(format!("{SEED_ENV}: {e}"))),
        };
        Ok(Self { seed_override, print_config: false })
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    let mut ctx = Context::from_env()?;
    ctx.print_config = cli.print_config;
    let Some(command) = cli.command else {
        if cli.print_config {
            commands::print_json(&commands::default_configs())?;
            return Ok(EXIT_OK);
        }
        return Err(CliError::input("no command given; see `radiomap --help`"));
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::input("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::input(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match command {
        Command::Generate(a) => commands::generate::run(&a, &ctx),
        Command::Build(a) => commands::build::run(&a, &ctx),
        Command::Localize(a) => commands::localize::run(&a, &ctx),
        Command::Evaluate(a) => commands::evaluate::run(&a, &ctx),
        Command::Theory(a) => commands::theory::run(&a, &ctx),
    })
}
