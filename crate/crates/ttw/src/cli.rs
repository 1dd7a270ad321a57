//! Argument parsing, dispatch and exit codes.
//!
//! Exit codes: 0 when the command ran cleanly, 1 when a check was violated
//! or an oracle cap was hit, 2 for usage, parse and IO errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use ttw_core::Caps;

use crate::bench::{self, BenchArgs};
use crate::caps::parse_caps;
use crate::commands::{self, AdversaryArgs, EmbedArgs, GenArgs, OptArgs, OrienteerArgs, SimulateArgs};
use crate::io::emit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ttw", version, about = "Online TSP with time windows: simulation lab")]
pub struct Cli {
    /// Seed for every generated metric and request sequence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Oracle cap overrides: JSON object, JSON file, or key=value list.
    #[arg(long, global = true, env = "TTW_CAPS")]
    pub caps: Option<String>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a metric and optionally a random request sequence.
    Gen(GenArgs),
    /// Star embedding of a metric, its verification and Embed-Prim traces.
    Embed(EmbedArgs),
    /// Solve an unrooted orienteering query.
    Orienteer(OrienteerArgs),
    /// Exact offline optimum of an instance.
    Opt(OptArgs),
    /// Run an online policy on an instance.
    Simulate(SimulateArgs),
    /// Run an adaptive lower-bound adversary against policies.
    Adversary(AdversaryArgs),
    /// Policy by instance grid, written as a CSV table.
    Bench(BenchArgs),
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub seed: u64,
    pub caps: Caps,
    pub format: Format,
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    /// Failed checks; any makes the exit code 1.
    pub violations: Vec<String>,
    /// Oracles skipped for exceeding a cap; any makes the exit code 1.
    pub capped: Vec<String>,
}

impl Outcome {
    pub fn text(text: String) -> Self {
        Outcome {
            text,
            ..Outcome::default()
        }
    }
}

fn is_cap_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<ttw_core::Error>(),
            Some(ttw_core::Error::InstanceTooLarge { .. })
        )
    })
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    let global = Global {
        seed: cli.seed,
        caps: parse_caps(cli.caps.as_deref())?,
        format: cli.format,
    };
    match cli.command {
        Command::Gen(a) => commands::gen(&global, &a),
        Command::Embed(a) => commands::embed(&global, &a),
        Command::Orienteer(a) => commands::orienteer(&global, &a),
        Command::Opt(a) => commands::opt(&global, &a),
        Command::Simulate(a) => commands::simulate(&global, &a),
        Command::Adversary(a) => commands::adversary(&global, &a),
        Command::Bench(a) => bench::bench(&global, &a),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match execute(cli) {
        Ok(o) => {
            if let Err(e) = emit(out.as_ref(), &o.text) {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            for v in &o.violations {
                eprintln!("violation: {v}");
            }
            for c in &o.capped {
                eprintln!("cap exceeded: {c}");
            }
            if o.violations.is_empty() && o.capped.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_cap_error(&e) { 1 } else { 2 })
        }
    }
}
