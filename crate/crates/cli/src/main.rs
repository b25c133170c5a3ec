//! `mimeforge` command-line front end.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "mimeforge", version, about = "Teacher simulation, conditional MUAP generation and EMG synthesis")]
struct Cli {
    /// Run configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, env = "MIMEFORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelIn {
    /// Checkpoint to load (overrides `paths.checkpoint`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct DataIn {
    /// Dataset file (overrides `paths.dataset`).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the MUAP dataset with the volume-conductor teacher.
    TeacherGen {
        #[command(flatten)]
        out: OutArg,
    },
    /// Train the generator and discriminator on the training split.
    Train {
        #[command(flatten)]
        data: DataIn,
        #[command(flatten)]
        out: OutArg,
    },
    /// Re-decode one dataset record under new conditions.
    Morph {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        data: DataIn,
        /// Record index in the dataset.
        #[arg(long)]
        index: usize,
        /// Six comma-separated normalized conditions; the record's own when omitted.
        #[arg(long)]
        conditions: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Decode prior draws at fixed conditions.
    Sample {
        #[command(flatten)]
        model: ModelIn,
        #[arg(long)]
        conditions: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Instead of independent draws, scale one draw's conditions by `1 + d` for d up to this distance.
        #[arg(long)]
        extrapolate: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Decode one latent along a condition path.
    Sweep {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        data: DataIn,
        /// Encode this dataset record; otherwise draw from the prior.
        #[arg(long)]
        index: Option<usize>,
        /// Start conditions for a straight path (with `--to`).
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        /// Number of steps (overrides `generate.steps`).
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sweep each unit between three grid points and score against the teacher.
    Traverse {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        data: DataIn,
        #[command(flatten)]
        out: OutArg,
    },
    /// Synthesize surface EMG from spike trains.
    Synth {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        data: DataIn,
        /// Also write a per-channel CSV.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Morph accuracy per split and latent informativeness.
    Eval {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        data: DataIn,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare generative and teacher per-MUAP time across fibre counts.
    Bench {
        #[command(flatten)]
        model: ModelIn,
        #[command(flatten)]
        out: OutArg,
    },
    /// Finite-difference check of every differentiable layer family at 64-bit.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a CSV report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report(&Failure::Usage(first.to_string()));
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}

fn report(f: &Failure) -> ExitCode {
    let msg = f.to_string().replace('\n', " ");
    eprintln!("error category={} message={}", f.category(), serde_json::Value::String(msg));
    ExitCode::from(f.exit_code())
}
