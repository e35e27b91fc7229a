use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use mcqa_cli::commands;
use mcqa_cli::config::load_config;
use mcqa_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "mcqa",
    version,
    about = "Measure and exploit position bias in option-list prompts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset manifest, validate it, and report its shape.
    Validate {
        /// Dataset manifest (JSON).
        manifest: PathBuf,
    },
    /// Score each sample's options by similarity to its query.
    Score {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override one config value, e.g. --set run.stride=2. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output file; defaults to <output_dir>/scores.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Move the correct option through each list position and measure
    /// accuracy per position.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate one option-arrangement strategy end to end.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Bundle finished runs into plot-ready CSVs plus a summary table.
    Report {
        /// A run directory. Repeatable.
        #[arg(long = "run", required = true)]
        run: Vec<PathBuf>,
        /// Output directory for the bundle.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Validate { manifest } => commands::cmd_validate(&manifest),
        Command::Score { config, set, out } => {
            let resolved = load_config(&config, &set)?;
            commands::cmd_score(&resolved, out.as_deref())
        }
        Command::Sweep { config, set } => {
            let resolved = load_config(&config, &set)?;
            commands::cmd_sweep(&resolved)
        }
        Command::Eval { config, set } => {
            let resolved = load_config(&config, &set)?;
            commands::cmd_eval(&resolved)
        }
        Command::Report { run, out } => commands::cmd_report(&run, &out),
    }
}

fn main() {
    match run(Cli::parse()) {
        Ok(report) => println!("{report}"),
        Err(err) => {
            eprintln!("error: {err}");
            process::exit(err.exit_code());
        }
    }
}
