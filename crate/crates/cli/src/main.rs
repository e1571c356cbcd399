//! `aec`: simulate scenarios, run the echo canceller, compare noise PSD
//! estimators, export training features and evaluate runs.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{RunArgs, ScenarioArgs};

#[derive(Parser, Debug)]
#[command(name = "aec", version, about = "Partitioned-block Kalman echo canceller with mask-based postfilter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scenario to WAV files plus a manifest.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the canceller on a scenario manifest or on a pair of WAV files.
    Run {
        /// Scenario manifest; provides ground truth for oracle modes and metrics.
        #[arg(long, conflicts_with_all = ["mic", "far_end"])]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "far_end")]
        mic: Option<PathBuf>,
        #[arg(long = "far", requires = "mic")]
        far_end: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare baseline and proposed noise PSD estimators over EPC scenarios.
    Compare {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds simulated after each echo path change.
        #[arg(long, default_value_t = 8.0)]
        post_epc: f64,
        /// Scenarios without a near-end talker.
        #[arg(long)]
        single_talk: bool,
        /// Transition coefficients of the baseline cells.
        #[arg(long, value_delimiter = ',', default_values_t = [0.99, 0.999, 0.9999])]
        baseline_a: Vec<f64>,
        #[arg(long, default_value_t = 0.9999)]
        proposed_a: f64,
        /// Recursive averaging factor of the time-dependent ERLE.
        #[arg(long, default_value_t = 0.99)]
        erle_smoothing: f64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Export oracle-mask training features and targets.
    ExportFeatures {
        /// Scenario manifests; repeatable.
        #[arg(long = "manifest")]
        manifests: Vec<PathBuf>,
        /// Additionally generate this many random EPC scenarios.
        #[arg(long, default_value_t = 0)]
        generate: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate a finished run or check network parity vectors.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Recompute metrics of a `run` output directory against its manifest.
    Metrics {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory of `aec run`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        erle_smoothing: f64,
    },
    /// Check the mask network against exported parity vectors.
    Parity {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, out } => commands::simulate(&scenario, &out),
        Command::Run { manifest, mic, far_end, run, out } => {
            let input = match (manifest, mic, far_end) {
                (Some(m), _, _) => commands::RunInput::Manifest(m),
                (None, Some(mic), Some(far)) => commands::RunInput::Wavs { mic, far },
                _ => {
                    eprintln!("error: pass --manifest or both --mic and --far");
                    return ExitCode::from(2);
                }
            };
            commands::run(input, &run, &out)
        }
        Command::Compare { count, seed, post_epc, single_talk, baseline_a, proposed_a, erle_smoothing, run, out } => {
            commands::compare(
                commands::CompareArgs { count, seed, post_epc, double_talk: !single_talk, baseline_a, proposed_a, erle_smoothing },
                &run,
                &out,
            )
        }
        Command::ExportFeatures { manifests, generate, seed, run, out } => {
            commands::export_features(&manifests, generate, seed, &run, &out)
        }
        Command::Eval(EvalCommand::Metrics { manifest, run_dir, erle_smoothing }) => {
            commands::eval_metrics(&manifest, &run_dir, erle_smoothing)
        }
        Command::Eval(EvalCommand::Parity { weights, vectors, tolerance }) => {
            commands::eval_parity(&weights, &vectors, tolerance)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
