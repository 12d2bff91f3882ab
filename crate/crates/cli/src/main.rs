//! `gatekeeper`: environments, leader paths, single trials and batches.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 safety failure, 3
//! bootstrap infeasible, 4 planner failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use config::Profile;

#[derive(Debug, Parser)]
#[command(
    name = "gatekeeper",
    version,
    about = "Formation flight behind a certified leader path"
)]
struct Cli {
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario seed. Defaults to the configured one.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file overriding profile values, keyed like the scenario config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Paper)]
    profile: Profile,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the obstacle field of a seed.
    GenEnv {
        #[command(flatten)]
        common: Common,
    },
    /// Plan and certify a leader path through an environment file.
    PlanLeader {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: PathBuf,
    },
    /// Fly one trial, either generated from the seed or from given files.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "env")]
        leader: Option<PathBuf>,
        #[arg(long, requires = "leader")]
        env: Option<PathBuf>,
    },
    /// Fly seeds `seed .. seed + trials`.
    Batch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
}

/// A command's failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Safety(String),
    Bootstrap(String),
    Planner(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Safety(_) => 2,
            Failure::Bootstrap(_) => 3,
            Failure::Planner(_) => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "{e:#}"),
            Failure::Safety(m) => write!(f, "safety failure: {m}"),
            Failure::Bootstrap(m) => write!(f, "bootstrap infeasible: {m}"),
            Failure::Planner(m) => write!(f, "planner failure: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    let outcome = match cli.command {
        Command::GenEnv { common } => commands::gen_env(&common),
        Command::PlanLeader { common, env } => commands::plan_leader(&common, &env),
        Command::Run {
            common,
            leader,
            env,
        } => commands::run(&common, leader.zip(env)),
        Command::Batch { common, trials } => commands::batch(&common, trials),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
