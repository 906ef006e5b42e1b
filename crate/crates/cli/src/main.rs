//! `cdsk`: feature extraction, noise mixing, training, enhancement,
//! evaluation and dCor queries for the skip-connection denoising autoencoder.
//!
//! Exit codes: 0 success, 1 invalid arguments or configuration, 2 failure
//! while processing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod failure;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use commands::{EvalArgs, TrainOverrides};
use failure::Failure;

#[derive(Parser)]
#[command(name = "cdsk", version, about = "Distance-correlation skip-connection denoising autoencoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract 40-dim log-Mel features from every WAV in a directory.
    Features {
        audio_dir: PathBuf,
        out_dir: PathBuf,
        /// Keep raw log energies instead of min-max normalizing per utterance.
        #[arg(long)]
        raw: bool,
        /// Also write a CSV next to each feature file.
        #[arg(long)]
        csv: bool,
    },
    /// Mix every clean WAV with every noise at every SNR; writes WAVs and manifest.csv.
    Mix {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long = "noise", required = true, num_args = 1..)]
        noise: Vec<PathBuf>,
        /// Comma-separated list, e.g. 0,5,10,20.
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,20", allow_negative_numbers = true)]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a TOML run config; flags override config keys.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        clean_dir: Option<PathBuf>,
        #[arg(long = "noise", num_args = 1..)]
        noise: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Enhance every .dcdf feature file in a directory with a trained checkpoint.
    Enhance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-(noise, SNR) feature MSE and dCor report from enhance/features output.
    Eval {
        #[arg(long)]
        enhanced: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report JSON path; the CSV goes next to it unless --csv is given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        checkpoint_id: Option<String>,
        #[arg(long)]
        corpus_id: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print dCor between two feature files (.dcdf or .csv).
    Dcor {
        a: PathBuf,
        b: PathBuf,
        /// Frames are subsampled (seeded) to at most this many per side.
        #[arg(long, default_value_t = cdsk::eval::DCOR_SAMPLE_SIZE)]
        max_frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic corpus (clean/ and noise/ WAV directories).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        utterances: usize,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Features { audio_dir, out_dir, raw, csv } => commands::cmd_features(&audio_dir, &out_dir, raw, csv),
        Command::Mix { clean, noise, snr, seed, out } => commands::cmd_mix(&clean, &noise, &snr, seed, &out),
        Command::Train {
            config,
            clean_dir,
            noise,
            snr,
            out_dir,
            seed,
            variant,
            beta,
            sigma,
            lr,
            batch_size,
            epochs,
        } => commands::cmd_train(
            config.as_deref(),
            TrainOverrides {
                clean_dir,
                noise_files: noise,
                snr_db: snr,
                out_dir,
                seed,
                variant,
                beta,
                sigma,
                lr,
                batch_size,
                epochs,
            },
        ),
        Command::Enhance { checkpoint, input, out } => commands::cmd_enhance(&checkpoint, &input, &out),
        Command::Eval {
            enhanced,
            noisy,
            clean,
            manifest,
            out,
            csv,
            checkpoint_id,
            corpus_id,
            seed,
        } => commands::cmd_eval(EvalArgs {
            enhanced_dir: &enhanced,
            noisy_dir: &noisy,
            clean_dir: &clean,
            manifest: &manifest,
            out_json: &out,
            out_csv: csv.as_deref(),
            checkpoint_id,
            corpus_id,
            seed,
        }),
        Command::Dcor { a, b, max_frames, seed } => commands::cmd_dcor(&a, &b, max_frames, seed).map(|_| ()),
        Command::Synth { out, utterances, seconds, seed } => commands::cmd_synth(&out, utterances, seconds, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
