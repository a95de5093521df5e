//! Command-line front end: loads a TOML config, runs one analysis and
//! writes CSV/JSON results plus a `manifest.json` into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{load_config, ToolConfig};
pub use error::{CliError, ConfigError};
use output::{config_digest, unix_millis, OutputDir, RunManifest, Timestamps};

#[derive(Debug, Parser)]
#[command(name = "umlm", version, about = "Loading-manipulator kinematics, contact forces and gripper synthesis")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed for `optimize` and `check`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Arm angles, rates and slider travel along the drive profile.
    SimulateArm,
    /// Contact forces over a grid of middle and distal contact distances.
    ForceSurface,
    /// One contact-force evaluation, closed form and oracle.
    EvalForces,
    /// Particle-swarm search for equal contact forces.
    Optimize {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        /// Worker threads for objective evaluation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Arm angle and vehicle travel that reach a target.
    Coordinate {
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
    },
    /// Closed-form vs oracle force sweep; fails when they disagree.
    Check {
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateArm => "simulate-arm",
            Command::ForceSurface => "force-surface",
            Command::EvalForces => "eval-forces",
            Command::Optimize { .. } => "optimize",
            Command::Coordinate { .. } => "coordinate",
            Command::Check { .. } => "check",
        }
    }
}

/// Run one command. The manifest is written whenever the output directory
/// could be created, including when the command itself fails.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let started = unix_millis();
    let cfg = load_config(cli.config.as_deref())?;
    let root = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut out = OutputDir::create(&root)?;
    let seed = match cli.command {
        Command::Optimize { .. } => Some(cli.seed.unwrap_or(cfg.pso.seed)),
        Command::Check { .. } => Some(cli.seed.unwrap_or(cfg.check.seed)),
        _ => cli.seed,
    };
    let result = match &cli.command {
        Command::SimulateArm => commands::simulate_arm(&cfg, &mut out),
        Command::ForceSurface => commands::force_surface_cmd(&cfg, &mut out),
        Command::EvalForces => commands::eval_forces(&cfg, &mut out),
        Command::Optimize { runs, particles, iters, threads } => {
            let args = commands::OptimizeArgs {
                runs: *runs,
                particles: *particles,
                iters: *iters,
                threads: *threads,
                seed: cli.seed,
            };
            commands::optimize(&cfg, &args, &mut out)
        }
        Command::Coordinate { x, y } => commands::coordinate(&cfg, *x, *y, &mut out),
        Command::Check { samples } => commands::check(&cfg, *samples, cli.seed, &mut out),
    };
    let mut outputs = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().into(),
        config_digest: config_digest(&cfg)?,
        seed,
        timestamps: Timestamps { started_unix_ms: started, finished_unix_ms: unix_millis() },
        outputs,
    };
    out.json("manifest.json", &manifest)?;
    result
}
