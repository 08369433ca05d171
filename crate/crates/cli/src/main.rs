use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use occbeam_cli::commands;

#[derive(Parser)]
#[command(name = "occbeam", version, about = "Own-voice beamforming under microphone occlusion: scene simulation, enhancement, and evaluation.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic scene and write its WAVs and flag streams.
    Simulate {
        /// Config file path, or "default" for built-in defaults.
        #[arg(long, default_value = "default")]
        config: String,
        #[arg(long, default_value_t = 0)]
        utterance: usize,
        #[arg(long, default_value_t = 0)]
        noise: usize,
        #[arg(long, default_value_t = 8)]
        switches: usize,
        #[arg(long, default_value_t = 5.0)]
        snr: f64,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config, then $OCCBEAM_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enhance a simulated scene directory with one strategy.
    Enhance {
        /// Scene directory produced by `simulate`.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "hybrid")]
        strategy: String,
        /// Reference side: left or right.
        #[arg(long, default_value = "left")]
        reference: String,
        #[arg(long, default_value = "default")]
        config: String,
        /// Use the corrupted VAD stream (flags_fn.csv).
        #[arg(long)]
        corrupted_vad: bool,
        /// Also dump the per-frame weight log as a binary file.
        #[arg(long)]
        dump_weights: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output WAV path (default: <scene>/enhanced_<strategy>.wav).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full evaluation grid and write results.csv / timings.csv.
    Evaluate {
        #[arg(long, default_value = "default")]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a results CSV into plot-ready JSON.
    Plotdata {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, utterance, noise, switches, snr, seed, out } => {
            commands::simulate(&config, utterance, noise, switches, snr, seed, out.as_deref())
                .map(|dir| println!("scene written to {}", dir.display()))
        }
        Command::Enhance {
            scene,
            strategy,
            reference,
            config,
            corrupted_vad,
            dump_weights,
            seed,
            out,
        } => commands::enhance(
            &scene,
            &strategy,
            &reference,
            &config,
            corrupted_vad,
            dump_weights,
            seed,
            out.as_deref(),
        )
        .map(|path| println!("enhanced output written to {}", path.display())),
        Command::Evaluate { config, seed, out } => {
            commands::evaluate(&config, seed, out.as_deref()).map(|_| ())
        }
        Command::Plotdata { csv, out } => commands::plotdata_cmd(&csv, out.as_deref())
            .map(|path| println!("plot data written to {}", path.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
