//! `untrack`: calculators, analyzers and simulators for everlasting
//! privacy and report untrackability.
//!
//! Subcommands fall into four groups: `bounds` (closed-form calculators),
//! `rappor` (worst-case and Monte-Carlo trackability of the Bloom-filter
//! report pipeline), `simulate` (bitwise and noisy-inner-product frequency
//! collection against their deviation bounds), and `distinguish` (exact
//! oracles over a mechanism described in JSON). Every run is deterministic
//! under `--seed` and embeds a manifest in its output; `replay` re-runs a
//! result file and verifies the bytes.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 oracle budget overrun.

mod config;
mod experiment;
mod table;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::Value;
use untrack_core::Error;

use experiment::{preferred_format, run_experiment, to_manifest_args};
use table::{normalized_for_comparison, parse_manifest, render, ExperimentManifest, OutputFormat};

const EXIT_VALIDATION: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(
    name = "untrack",
    version,
    about = "Everlasting-privacy and untrackability analysis toolkit"
)]
struct Cli {
    /// Master seed for all randomness (default: config file, then
    /// UNTRACK_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format (default: csv for tables, json for simulations).
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write the result file here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value config file (keys: seed, format, out).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form privacy and untrackability calculators.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Bloom-filter report pipeline trackability analyses.
    #[command(subcommand)]
    Rappor(RapporCommand),
    /// Frequency-collection simulations against their deviation bounds.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Exact distinguishing oracles for a finite mechanism JSON document.
    Distinguish(DistinguishCli),
    /// Re-run the manifest embedded in a result file and diff the outputs.
    Replay(ReplayCli),
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Chained local-privacy levels for one mechanism feeding another.
    Chain(experiment::ChainArgs),
    /// Advanced composition of repeated mechanisms.
    Compose(experiment::ComposeArgs),
    /// Untrackability of a permanent-state mechanism.
    Permanent(experiment::PermanentArgs),
    /// Untrackability across more than two users.
    Multiuser(experiment::MultiuserArgs),
    /// Undetectability of a changed value from the two building blocks.
    Undetectable(experiment::UndetectableArgs),
}

#[derive(Subcommand)]
enum RapporCommand {
    /// Worst-case trackability series over report counts.
    WorstCase(experiment::RapporWorstCaseArgs),
    /// Monte-Carlo percentiles of the trackability random variable.
    Percentiles(experiment::RapporPercentilesArgs),
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Single-bit doubly randomized response.
    Bitwise(experiment::SimulateBitwiseArgs),
    /// Report noisy inner product over d-bit values.
    Rnip(experiment::SimulateRnipArgs),
}

#[derive(clap::Args)]
struct DistinguishCli {
    /// Path to the mechanism JSON document {inputs, states, reports,
    /// state_prior, report_kernel}.
    #[arg(long)]
    mech: PathBuf,
    /// Analyze report counts k = 1..=k-max.
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// Evaluation budget for the exact oracles.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
}

#[derive(clap::Args)]
struct ReplayCli {
    /// A result file produced by this tool.
    #[arg(long)]
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.exit_code)
        }
    }
}

struct Failure {
    message: String,
    exit_code: u8,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            exit_code: EXIT_VALIDATION,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let exit_code = match err {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            _ => EXIT_VALIDATION,
        };
        Failure {
            message: err.to_string(),
            exit_code,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure {
            message: err.to_string(),
            exit_code: 1,
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    let file_config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            config::parse(&text)
                .map_err(|e| Failure::validation(format!("config {}: {e}", path.display())))?
        }
        None => config::FileConfig::default(),
    };
    let seed = cli
        .seed
        .or(file_config.seed)
        .or_else(seed_from_env)
        .unwrap_or(0);
    let format_override = cli.format.or(file_config.format);
    let out = cli.out.clone().or(file_config.out);

    if let Command::Replay(replay) = &cli.command {
        return run_replay(&replay.file, out.as_deref());
    }

    let (kind, args) = describe(&cli.command)?;
    let table = run_experiment(&kind, &args, seed)?;
    let format = format_override.unwrap_or_else(|| preferred_format(&kind));
    let manifest = ExperimentManifest {
        kind,
        args,
        master_seed: seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: unix_timestamp(),
        outputs: out.iter().map(|p| p.display().to_string()).collect(),
    };
    let content = render(&table, &manifest, format);
    match &out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// The experiment kind tag and manifest argument block of a parsed
/// command.
fn describe(command: &Command) -> Result<(String, BTreeMap<String, Value>), Failure> {
    let (kind, args) = match command {
        Command::Bounds(BoundsCommand::Chain(a)) => ("bounds-chain", to_manifest_args(a)),
        Command::Bounds(BoundsCommand::Compose(a)) => ("bounds-compose", to_manifest_args(a)),
        Command::Bounds(BoundsCommand::Permanent(a)) => ("bounds-permanent", to_manifest_args(a)),
        Command::Bounds(BoundsCommand::Multiuser(a)) => ("bounds-multiuser", to_manifest_args(a)),
        Command::Bounds(BoundsCommand::Undetectable(a)) => {
            ("bounds-undetectable", to_manifest_args(a))
        }
        Command::Rappor(RapporCommand::WorstCase(a)) => ("rappor-worst-case", to_manifest_args(a)),
        Command::Rappor(RapporCommand::Percentiles(a)) => {
            ("rappor-percentiles", to_manifest_args(a))
        }
        Command::Simulate(SimulateCommand::Bitwise(a)) => ("simulate-bitwise", to_manifest_args(a)),
        Command::Simulate(SimulateCommand::Rnip(a)) => ("simulate-rnip", to_manifest_args(a)),
        Command::Distinguish(a) => {
            let text = std::fs::read_to_string(&a.mech)?;
            let mechanism: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::validation(format!("mechanism {}: {e}", a.mech.display())))?;
            let args = experiment::DistinguishArgs {
                mechanism,
                k_max: a.k_max,
                budget: a.budget,
            };
            ("distinguish", to_manifest_args(&args))
        }
        Command::Replay(_) => unreachable!("replay handled before describe"),
    };
    Ok((kind.to_string(), args))
}

fn run_replay(file: &Path, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let original = std::fs::read_to_string(file)?;
    let (manifest, format) = parse_manifest(&original).map_err(Failure::validation)?;
    let table = run_experiment(&manifest.kind, &manifest.args, manifest.master_seed)?;
    let regenerated = render(
        &table,
        &ExperimentManifest {
            timestamp: unix_timestamp(),
            outputs: out.iter().map(|p| p.display().to_string()).collect(),
            ..manifest.clone()
        },
        format,
    );
    if let Some(path) = out {
        std::fs::write(path, &regenerated)?;
    }
    if normalized_for_comparison(&original) == normalized_for_comparison(&regenerated) {
        println!(
            "replay: `{}` ({}) reproduced identically (timestamp excluded)",
            manifest.kind, manifest.master_seed
        );
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Failure::validation(format!(
            "replay: regenerated output differs from {}",
            file.display()
        )))
    }
}

fn seed_from_env() -> Option<u64> {
    std::env::var("UNTRACK_SEED").ok()?.trim().parse().ok()
}

fn unix_timestamp() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}
