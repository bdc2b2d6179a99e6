//! `wespsq`: preprocessing, ensemble training, evaluation, spelling sweeps and
//! simulation for the P300 speller.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "wespsq", version, about)]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Report directory; overrides `report_dir` from the config.
    #[arg(long, global = true)]
    report_dir: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "WESPSQ_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled session (EEGB).
    Synth(SynthArgs),
    /// Filter a session and cut one epoch per flash (EEGB to EPB1).
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write decimated feature vectors as CSV.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Train the ensemble on a labeled session or epoch file.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// Directory for the member weights and `bundle.json`.
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Per-member and ensemble classification of every epoch.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Character accuracy against the number of repetitions.
    #[command(group(ArgGroup::new("scorer").required(true).args(["bundle", "oracle"])))]
    Spell {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Score flashes from their labels instead of a trained bundle.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        input: PathBuf,
    },
    /// Spelling curves of each member alone next to the ensemble.
    Ablate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Simulated character accuracy for a given AUC or d'.
    #[command(group(ArgGroup::new("separation").required(true).args(["auc", "dprime"])))]
    Simulate {
        #[arg(long)]
        auc: Option<f64>,
        #[arg(long)]
        dprime: Option<f64>,
        #[arg(long, default_value_t = 15)]
        reps: usize,
        /// Simulated characters.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// SynthConfig JSON; flags below override its fields.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    characters: Option<usize>,
    #[arg(long)]
    text: Option<String>,
    #[arg(long)]
    channels: Option<usize>,
    /// Template peak, µV.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Noise standard deviation, µV.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let config = config::PipelineConfig::load(cli.config.as_deref())?;
    let report_dir = cli.report_dir.unwrap_or_else(|| config.report_dir.clone());
    eprintln!("config_hash={}", config.hash());
    let ctx = commands::Context { config, report_dir };
    match cli.command {
        Command::Synth(args) => commands::synth(&ctx, args),
        Command::Preprocess {
            input,
            output,
            features,
        } => commands::preprocess(&ctx, &input, &output, features.as_deref()),
        Command::Train { input, bundle } => commands::train(&ctx, &input, &bundle),
        Command::Evaluate { bundle, input } => commands::evaluate(&ctx, &bundle, &input),
        Command::Spell {
            bundle,
            oracle,
            input,
        } => commands::spell(&ctx, if oracle { None } else { bundle.as_deref() }, &input),
        Command::Ablate { bundle, input } => commands::ablate(&ctx, &bundle, &input),
        Command::Simulate {
            auc,
            dprime,
            reps,
            n,
            seed,
        } => commands::simulate(&ctx, auc, dprime, reps, n, seed),
    }
}
