use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tslab_cli::commands::{cmd_constants, cmd_edit, cmd_gradcheck, cmd_plotdata, cmd_train, gradcheck_text};
use tslab_cli::config::{parse_config, ExperimentConfig};
use tslab_cli::experiments::preset;
use tslab_cli::properties::run_all_properties;

/// Two-component attention training lab.
///
/// Training is full batch: one epoch is exactly one gradient step on the
/// mean loss over all N prompts.
#[derive(Parser)]
#[command(name = "tslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed (one full-batch step per epoch) and write
    /// trajectory.csv, weight snapshots and summary.txt under output_dir/seed-<s>.
    Train {
        /// Config file; the bundled two-stage preset when omitted.
        config: Option<PathBuf>,
        /// Replaces the config's seed list.
        #[arg(long, env = "TSLAB_SEED")]
        seed: Option<u64>,
        /// Overrides output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the generated dataset.
        #[arg(long)]
        save_dataset: bool,
    },
    /// Analytic vs central finite-difference gradients at d=5, L=8, N=4.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Spectral edits of a weight snapshot over the config's rho grid.
    Edit {
        config: PathBuf,
        snapshot: PathBuf,
        /// Seed that regenerates the evaluation dataset.
        #[arg(long, env = "TSLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "edited_eval.csv")]
        out: PathBuf,
    },
    /// Print epoch plus the chosen trajectory columns, whitespace separated.
    Plotdata {
        csv: PathBuf,
        /// Column names, or `all`.
        #[arg(required = true, value_delimiter = ',')]
        columns: Vec<String>,
    },
    /// Print the derived schedule constants for a config.
    Constants { config: Option<PathBuf> },
    /// Run the invariant registry and print one line per case.
    Properties,
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(preset()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            save_dataset,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            for dir in cmd_train(&cfg, save_dataset)? {
                println!("{}", dir.display());
            }
        }
        Command::Gradcheck { seeds } => {
            let report = cmd_gradcheck(seeds);
            print!("{}", gradcheck_text(&report));
            if !report.passed() {
                bail!("gradient check failed");
            }
        }
        Command::Edit {
            config,
            snapshot,
            seed,
            out,
        } => {
            let cfg = load(Some(&config))?;
            let rows = cmd_edit(&cfg, &snapshot, seed, &out)?;
            println!("{} rows -> {}", rows.len(), out.display());
        }
        Command::Plotdata { csv, columns } => print!("{}", cmd_plotdata(&csv, &columns)?),
        Command::Constants { config } => print!("{}", cmd_constants(&load(config.as_ref())?)),
        Command::Properties => {
            let (ok, report) = run_all_properties();
            print!("{report}");
            if !ok {
                bail!("property failures");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
