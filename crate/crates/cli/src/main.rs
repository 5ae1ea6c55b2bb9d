mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use faultloc::pipeline::Mode;
use faultloc::ErrorClass;

use commands::{Common, Split};
use config::{Robustness, RunConfig, Scale};

/// Ground-fault location on a radial feeder from substation voltages.
#[derive(Parser)]
#[command(name = "faultloc", version)]
struct Cli {
    /// Run seed (pipeline seed for train/ablate).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// TOML or JSON file with `network`, `[grid]`, `[sim]` and `[pipeline]` overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite an output directory that already holds a run.
    #[arg(long, global = true)]
    force: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
#[group(multiple = false)]
struct ScaleArgs {
    /// Reduced grid at 1/16 of the full sampling rate (default).
    #[arg(long)]
    desk_scale: bool,
    /// Full grid at 0.67 MHz.
    #[arg(long)]
    paper_scale: bool,
}

impl ScaleArgs {
    fn scale(&self) -> Scale {
        if self.paper_scale {
            Scale::Paper
        } else {
            Scale::Desk
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fault dataset.
    Generate {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Generate one of the robustness sets instead of the training grid.
        #[arg(long, value_enum)]
        robustness: Option<Robustness>,
        /// Network config (TOML); defaults to the bundled feeder.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the record count without simulating.
        #[arg(long)]
        dry_run: bool,
    },
    /// Train the staged networks on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained locator on a dataset.
    Evaluate {
        #[arg(long)]
        locator: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::HeldOut)]
        split: Split,
        /// Also simulate and score a robustness set derived from the dataset's grid.
        #[arg(long, value_enum)]
        robustness: Option<Robustness>,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate the fault in one waveform record.
    Predict {
        #[arg(long)]
        locator: PathBuf,
        /// Waveform record file (.flwf).
        record: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Compare per-type networks with single shared networks.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: faultloc::Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err.chain().find_map(|e| e.downcast_ref::<faultloc::Error>()).map(|e| e.class());
    match class {
        Some(ErrorClass::Usage) => 2,
        Some(ErrorClass::Validation) => 3,
        Some(ErrorClass::Data) => 4,
        Some(ErrorClass::Numerical) => 5,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = Common {
        seed: cli.seed,
        jobs: cli.jobs,
        config: RunConfig::load(cli.config.as_deref())?,
        force: cli.force,
    };
    match cli.command {
        Command::Generate {
            scale,
            robustness,
            network,
            out,
            dry_run,
        } => commands::generate(&common, scale.scale(), robustness, network.as_deref(), out, dry_run),
        Command::Train {
            dataset,
            mode,
            network,
            out,
        } => commands::train(&common, &dataset, mode, network.as_deref(), out),
        Command::Evaluate {
            locator,
            dataset,
            split,
            robustness,
            network,
            out,
        } => commands::evaluate_cmd(&common, &locator, &dataset, split, robustness, network.as_deref(), out),
        Command::Predict { locator, record, json } => commands::predict(&locator, &record, json),
        Command::Ablate { dataset, network, out } => commands::ablate(&common, &dataset, network.as_deref(), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
