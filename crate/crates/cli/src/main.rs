mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CostSection, DistSection, FileConfig, IoPaths, RunConfig, CONFIG_ENV};
use error::CliError;

/// Solver, simulator and report analysis for the cheating game with vague messages.
#[derive(Debug, Parser)]
#[command(name = "vaguelie", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve one environment and report the equilibrium.
    Solve,
    /// Simulate reports from a solved or supplied profile.
    Simulate,
    /// Label each report in a CSV with its message form.
    Classify,
    /// Check a supplied or named profile for equilibrium.
    Verify,
    /// Summary statistics, subject typology and message-length distribution.
    Analyze,
    /// Evaluate the four hypotheses on solved profiles.
    Hypotheses,
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Environment: a-r, a-ur, na-r or na-ur.
    #[arg(long, global = true)]
    env: Option<String>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Upper end of the uniform aversion distribution (default N + gamma + 1).
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Cost variant: zero, linear or quadratic.
    #[arg(long, global = true)]
    cost: Option<String>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Aversion distribution variant (uniform).
    #[arg(long, global = true)]
    dist: Option<String>,
    /// Number of aversion cells.
    #[arg(long, global = true)]
    t_grid: Option<usize>,
    #[arg(long, global = true)]
    damping: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// truthful, example1, example2 (interval) or anonymous-solution.
    #[arg(long, global = true)]
    seed_profile: Option<String>,
    #[arg(long, global = true)]
    off_path: Option<f64>,
    #[arg(long, global = true)]
    agents: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// randomized or fixed (restricted first).
    #[arg(long, global = true)]
    stage_order: Option<String>,
    /// Simulate both stages per subject.
    #[arg(long, global = true)]
    paired: bool,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file, or directory for `solve`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Profile JSON written by `solve`.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Beliefs JSON written by `solve`.
    #[arg(long, global = true)]
    beliefs: Option<PathBuf>,
    /// csv, json or table.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Show payoffs in dollars (number / 2).
    #[arg(long, global = true)]
    dollars: bool,
    /// Omit the timestamp header from table output.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

impl Flags {
    fn split(self) -> (Option<PathBuf>, FileConfig, IoPaths) {
        let cost = (self.cost.is_some() || self.kappa.is_some())
            .then(|| CostSection { variant: self.cost, kappa: self.kappa });
        let file = FileConfig {
            env: self.env,
            n: self.n,
            gamma: self.gamma,
            t_max: self.t_max,
            t_grid: self.t_grid,
            cost,
            dist: self.dist.map(|v| DistSection { variant: Some(v) }),
            damping: self.damping,
            max_iter: self.max_iter,
            tol: self.tol,
            seed_profile: self.seed_profile,
            off_path: self.off_path,
            agents: self.agents,
            seed: self.seed,
            stage_order: self.stage_order,
            format: self.format,
            dollars: self.dollars.then_some(true),
            timestamp: self.no_timestamp.then_some(false),
        };
        let io = IoPaths {
            input: self.input,
            output: self.output,
            profile: self.profile,
            beliefs: self.beliefs,
            paired: self.paired,
        };
        (self.config, file, io)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config_path, flags, io) = cli.flags.split();
    let base = match config_path {
        Some(p) => FileConfig::load(&p)?,
        None => FileConfig::default(),
    };
    let run = RunConfig::resolve(base.overlay(flags), io)?;
    commands::dispatch(cli.command, &run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
