use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aec_core::dataset::export_training_data;
use aec_core::engine::{process_stream, EchoCanceller, MaskSource, RunConfig, RunOutput, StreamInputs};
use aec_core::experiment::{compare_estimators, default_grid, evaluate, interference, CompareOptions, EpcScenarioSpec};
use aec_core::metrics::runtime_stats;
use aec_core::postfilter::{NetworkWeights, ParityVectors};
use aec_core::scenario::{wav_read, wav_write, Manifest, Scenario};
use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use crate::args::{read_json, RunArgs, ScenarioArgs};

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const BLOCK_LOG_FILE: &str = "block_log.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn simulate(args: &ScenarioArgs, out: &Path) -> Result<()> {
    let config = args.resolve()?;
    let scenario = Scenario::generate(&config)?;
    create_dir(out)?;
    scenario.write_to(out)?;
    println!("wrote {} samples ({:.2} s) to {}", scenario.len(), config.duration, out.display());
    Ok(())
}

pub enum RunInput {
    Manifest(PathBuf),
    Wavs { mic: PathBuf, far: PathBuf },
}

fn read_wav(path: &Path, sample_rate: u32) -> Result<Vec<f64>> {
    let (x, fs) = wav_read(path).with_context(|| format!("reading {}", path.display()))?;
    ensure!(fs == sample_rate, "{} is sampled at {fs} Hz, the run expects {sample_rate} Hz", path.display());
    Ok(x)
}

fn canceller(config: &RunConfig) -> Result<EchoCanceller> {
    EchoCanceller::new(config.clone()).context("building the echo canceller")
}

#[derive(Serialize)]
struct RuntimeReport {
    rtf: f64,
    block_time_ms: f64,
    blocks: usize,
}

pub fn run(input: RunInput, args: &RunArgs, out: &Path) -> Result<()> {
    let config = args.resolve()?;
    let fs = config.sample_rate;
    let mut aec = canceller(&config)?;
    create_dir(out)?;
    match input {
        RunInput::Manifest(path) => {
            let manifest = Manifest::read(&path).with_context(|| format!("reading {}", path.display()))?;
            ensure!(manifest.config.sample_rate == fs, "scenario rate {} Hz differs from run rate {fs} Hz", manifest.config.sample_rate);
            let sc = manifest.regenerate()?;
            let inter = interference(&sc);
            let inputs = StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter);
            let result = process_stream(&mut aec, inputs)?;
            let report = evaluate(&aec, &sc, &result, aec_core::metrics::DEFAULT_ERLE_SMOOTHING)?;
            write_outputs(out, &config, &result)?;
            fs::write(out.join("report.json"), report.to_json()?)?;
            report.write_series_csv(BufWriter::new(File::create(out.join("erle.csv"))?), config.block_shift, fs)?;
            println!(
                "ERLE {:.2} dB, after postfilter {:.2} dB, RTF {:.4}",
                report.erle_avg,
                report.erle_pf.unwrap_or(f64::NAN),
                report.rtf
            );
        }
        RunInput::Wavs { mic, far } => {
            if config.needs_truth() {
                bail!("oracle masks and oracle PSDs need a scenario manifest");
            }
            let (mic, far) = (read_wav(&mic, fs)?, read_wav(&far, fs)?);
            ensure!(mic.len() == far.len(), "microphone and far-end lengths differ ({} vs {})", mic.len(), far.len());
            let result = process_stream(&mut aec, StreamInputs::new(&far, &mic))?;
            write_outputs(out, &config, &result)?;
            let stats = runtime_stats(&result.log.block_times(), config.block_shift, fs)?;
            let report = RuntimeReport { rtf: stats.rtf, block_time_ms: stats.block_time_ms, blocks: result.log.len() };
            write_json(&out.join("report.json"), &report)?;
            println!("processed {} blocks, RTF {:.4}", report.blocks, report.rtf);
        }
    }
    Ok(())
}

fn write_outputs(out: &Path, config: &RunConfig, result: &RunOutput) -> Result<()> {
    let fs = config.sample_rate;
    wav_write(out.join("near_end_estimate.wav"), &result.near_end_estimate, fs)?;
    wav_write(out.join("echo_estimate.wav"), &result.echo_estimate, fs)?;
    wav_write(out.join("prior_error.wav"), &result.prior_error, fs)?;
    write_json(&out.join(RUN_CONFIG_FILE), config)?;
    let mut log = BufWriter::new(File::create(out.join(BLOCK_LOG_FILE))?);
    serde_json::to_writer(&mut log, &result.log)?;
    log.flush()?;
    Ok(())
}

pub struct CompareArgs {
    pub count: usize,
    pub seed: u64,
    pub post_epc: f64,
    pub double_talk: bool,
    pub baseline_a: Vec<f64>,
    pub proposed_a: f64,
    pub erle_smoothing: f64,
}

pub fn compare(args: CompareArgs, run: &RunArgs, out: &Path) -> Result<()> {
    ensure!(args.count > 0, "--count must be at least 1");
    let base = run.resolve()?;
    let spec = EpcScenarioSpec {
        count: args.count,
        seed: args.seed,
        post_epc: args.post_epc,
        double_talk: args.double_talk,
        block_shift: base.block_shift,
        filter_len: base.block_shift * base.partitions,
        ..Default::default()
    };
    let grid = default_grid(&args.baseline_a, args.proposed_a, &base);
    let options = CompareOptions { erle_smoothing: args.erle_smoothing, ..Default::default() };
    let report = compare_estimators(&grid, &spec.configs(), options)?;
    create_dir(out)?;
    fs::write(out.join("curves.csv"), report.to_csv())?;
    fs::write(out.join("summary.csv"), report.summary_csv())?;
    write_json(&out.join("scenarios.json"), &spec)?;
    print!("{}", report.summary_csv());
    Ok(())
}

pub fn export_features(manifests: &[PathBuf], generate: usize, seed: u64, run: &RunArgs, out: &Path) -> Result<()> {
    ensure!(!manifests.is_empty() || generate > 0, "pass --manifest or --generate");
    let config = run.resolve()?;
    let mut scenarios = Vec::with_capacity(manifests.len() + generate);
    for path in manifests {
        let manifest = Manifest::read(path).with_context(|| format!("reading {}", path.display()))?;
        scenarios.push(manifest.regenerate()?);
    }
    let spec = EpcScenarioSpec {
        count: generate,
        seed,
        block_shift: config.block_shift,
        filter_len: config.block_shift * config.partitions,
        ..Default::default()
    };
    for sc_cfg in spec.configs() {
        scenarios.push(Scenario::generate(&sc_cfg)?);
    }
    let inters: Vec<Vec<f64>> = scenarios.iter().map(interference).collect();
    let inputs: Vec<StreamInputs> = scenarios
        .iter()
        .zip(&inters)
        .map(|(s, i)| StreamInputs::new(&s.far_end, &s.mic).with_truth(&s.near_end, i))
        .collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let header = export_training_data(&config, &inputs, out)?;
    println!(
        "wrote {} frames from {} sequences ({} features, {} targets) to {}",
        header.frames,
        header.sequences.len(),
        header.feature_dim,
        header.target_dim,
        out.display()
    );
    Ok(())
}

pub fn eval_metrics(manifest: &Path, run_dir: &Path, erle_smoothing: f64) -> Result<()> {
    let config: RunConfig = read_json(&run_dir.join(RUN_CONFIG_FILE))?;
    let log = read_json(&run_dir.join(BLOCK_LOG_FILE))?;
    let sc = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?.regenerate()?;
    let result = RunOutput::from_log(log, &sc.mic)?;
    // only the block geometry is needed here, never the mask source
    let aec = canceller(&RunConfig { mask: MaskSource::Unity, ..config })?;
    let report = evaluate(&aec, &sc, &result, erle_smoothing)?;
    println!("{}", report.to_json()?);
    Ok(())
}

pub fn eval_parity(weights: &Path, vectors: &Path, tolerance: f64) -> Result<()> {
    let w = NetworkWeights::read(weights).with_context(|| format!("reading {}", weights.display()))?;
    let p = ParityVectors::read(vectors).with_context(|| format!("reading {}", vectors.display()))?;
    let dev = p.max_deviation(&w)?;
    println!("{} frames, max |mask deviation| = {dev:.3e} (tolerance {tolerance:.0e})", p.features.len());
    ensure!(dev <= tolerance, "parity check failed");
    Ok(())
}
