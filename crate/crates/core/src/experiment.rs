//! Scenario-level evaluation and the estimator comparison harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsp::synthesis_window;
use crate::engine::{process_stream, EchoCanceller, Estimator, MaskSource, RunConfig, RunOutput, StreamInputs};
use crate::error::{Error, Result};
use crate::metrics::{
    erle_after_pf, erle_average, erle_time_dependent, near_end_distortion, runtime_stats, MaskReplay,
    MetricsReport, DEFAULT_ERLE_SMOOTHING, POWER_FLOOR,
};
use crate::scenario::{Scenario, ScenarioConfig, SourceKind};

/// Late echo, noise and near-end: what the early-echo model cannot explain.
pub fn interference(scenario: &Scenario) -> Vec<f64> {
    scenario
        .echo_late
        .iter()
        .zip(&scenario.near_end)
        .zip(&scenario.noise)
        .map(|((l, s), n)| l + s + n)
        .collect()
}

/// Runs a fresh canceller over a scenario with ground truth attached.
pub fn run_scenario(config: &RunConfig, scenario: &Scenario) -> Result<(EchoCanceller, RunOutput)> {
    let mut aec = EchoCanceller::new(config.clone())?;
    let inter = interference(scenario);
    let inputs = StreamInputs::new(&scenario.far_end, &scenario.mic).with_truth(&scenario.near_end, &inter);
    let out = process_stream(&mut aec, inputs)?;
    Ok((aec, out))
}

/// Metrics of one run against its scenario. The postfilter figures replay
/// the recorded masks; `s_pf` is omitted when the near-end is silent.
pub fn evaluate(aec: &EchoCanceller, scenario: &Scenario, out: &RunOutput, erle_smoothing: f64) -> Result<MetricsReport> {
    let spec = aec.spec();
    let d = &scenario.echo;
    let synth = synthesis_window(aec.analysis_window());
    let pf = MaskReplay {
        masks: &out.masks,
        dft: aec.dft(),
        analysis_window: aec.analysis_window(),
        synthesis_window: &synth,
    };
    let runtime = runtime_stats(&out.log.block_times(), spec.shift(), aec.config().sample_rate)?;
    let distortion = if scenario.near_end.iter().map(|v| v * v).sum::<f64>() >= POWER_FLOOR {
        Some(near_end_distortion(&scenario.near_end, &pf.apply(&scenario.near_end)?)?)
    } else {
        None
    };
    Ok(MetricsReport {
        erle_series: erle_time_dependent(d, &out.echo_estimate, spec.shift(), erle_smoothing)?,
        erle_avg: erle_average(d, &out.echo_estimate)?,
        erle_pf: Some(erle_after_pf(d, &out.echo_estimate, &pf)?),
        s_pf: distortion.map(|x| x.s_pf_db),
        beta: distortion.map(|x| x.beta),
        s_pf_degenerate: distortion.is_some_and(|x| x.degenerate),
        rtf: runtime.rtf,
        block_time_ms: runtime.block_time_ms,
    })
}

/// Scenario family with one echo path change: an initial segment of random
/// length in `[7.2, 8.8]` s followed by `post_epc` seconds, random NER in
/// `[-10, 10]` dB (or no near-end) and ENR in `[30, 35]` dB.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpcScenarioSpec {
    pub count: usize,
    pub seed: u64,
    pub post_epc: f64,
    pub double_talk: bool,
    pub rir_len: usize,
    pub t60_range: (f64, f64),
    pub filter_len: usize,
    pub block_shift: usize,
}

impl Default for EpcScenarioSpec {
    fn default() -> Self {
        Self {
            count: 10,
            seed: 0,
            post_epc: 8.0,
            double_talk: true,
            rir_len: 4096,
            t60_range: (0.2, 0.3),
            filter_len: 2048,
            block_shift: 256,
        }
    }
}

impl EpcScenarioSpec {
    pub fn configs(&self) -> Vec<ScenarioConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let epc = rng.random_range(7.2..=8.8);
                let ner = rng.random_range(-10.0..=10.0);
                let enr = rng.random_range(30.0..=35.0);
                let t60 = rng.random_range(self.t60_range.0..=self.t60_range.1);
                ScenarioConfig {
                    duration: epc + self.post_epc,
                    ner_db: self.double_talk.then_some(ner),
                    enr_db: enr,
                    rir_len: self.rir_len,
                    rir_t60: t60,
                    epc_times: vec![epc],
                    seed: rng.random(),
                    filter_len: self.filter_len,
                    block_shift: self.block_shift,
                    far_end: SourceKind::Speech,
                    near_end: SourceKind::Speech,
                    ..Default::default()
                }
            })
            .collect()
    }
}

/// One column of the comparison grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub label: String,
    pub config: RunConfig,
}

impl GridCell {
    pub fn new(label: impl Into<String>, config: RunConfig) -> Self {
        Self { label: label.into(), config }
    }
}

/// Baseline estimator at each transition coefficient plus the proposed
/// estimator, all with the oracle mask.
pub fn default_grid(baseline_transitions: &[f64], proposed_transition: f64, base: &RunConfig) -> Vec<GridCell> {
    let mut cells: Vec<GridCell> = baseline_transitions
        .iter()
        .map(|&a| {
            GridCell::new(
                format!("baseline A={a}"),
                RunConfig {
                    transition: a,
                    estimator: Estimator::Baseline { alpha: 0.5 },
                    mask: MaskSource::Oracle,
                    ..base.clone()
                },
            )
        })
        .collect();
    cells.push(GridCell::new(
        format!("proposed A={proposed_transition}"),
        RunConfig {
            transition: proposed_transition,
            estimator: Estimator::Proposed,
            mask: MaskSource::Oracle,
            ..base.clone()
        },
    ));
    cells
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompareOptions {
    pub erle_smoothing: f64,
    /// Seconds before the EPC over which the steady state is averaged.
    pub steady_window: f64,
    /// Fraction of the steady-state dB value that counts as recovered.
    pub recovery_fraction: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            erle_smoothing: DEFAULT_ERLE_SMOOTHING,
            steady_window: 2.0,
            recovery_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub label: String,
    /// Mean of the scenario-averaged ERLE curve over the steady window, dB.
    pub steady_state_db: f64,
    /// Seconds from the EPC until the averaged curve, after its post-EPC
    /// minimum, first reaches the recovery fraction of the steady state.
    /// `None` if it never does.
    pub recovery_time_s: Option<f64>,
    pub erle_avg_db: f64,
    pub erle_pf_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub options: CompareOptions,
    /// Block offsets relative to the EPC block.
    pub offsets: Vec<i64>,
    pub block_secs: f64,
    /// Scenario-averaged ERLE curve per cell, aligned at the EPC.
    pub curves: Vec<Vec<f64>>,
    pub cells: Vec<CellSummary>,
}

impl ComparisonReport {
    pub fn cell(&self, label: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// Long-format CSV: one row per (cell, block offset).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,offset_blocks,time_s,erle_db\n");
        for (cell, curve) in self.cells.iter().zip(&self.curves) {
            for (off, v) in self.offsets.iter().zip(curve) {
                out += &format!("{},{off},{:.4},{v:.4}\n", cell.label, *off as f64 * self.block_secs);
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("cell,steady_state_db,recovery_time_s,erle_avg_db,erle_pf_db\n");
        for c in &self.cells {
            let rec = c.recovery_time_s.map(|t| format!("{t:.4}")).unwrap_or_default();
            out += &format!(
                "{},{:.4},{rec},{:.4},{:.4}\n",
                c.label, c.steady_state_db, c.erle_avg_db, c.erle_pf_db
            );
        }
        out
    }
}

struct CellRun {
    series: Vec<Option<f64>>,
    epc_block: usize,
    erle_avg: f64,
    erle_pf: f64,
}

/// Steady state and recovery time of an EPC-aligned curve.
pub fn reconvergence(curve: &[f64], epc_index: usize, steady_blocks: usize, block_secs: f64, fraction: f64) -> (f64, Option<f64>) {
    let pre = &curve[epc_index.saturating_sub(steady_blocks)..epc_index];
    let steady = pre.iter().sum::<f64>() / pre.len().max(1) as f64;
    let post = &curve[epc_index..];
    let dip = post
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let target = fraction * steady;
    let recovered = post[dip..].iter().position(|&v| v >= target).map(|i| (dip + i) as f64 * block_secs);
    (steady, recovered)
}

/// Runs every grid cell on every scenario (scenarios in parallel) and
/// summarizes the EPC-aligned ERLE curves.
pub fn compare_estimators(grid: &[GridCell], scenarios: &[ScenarioConfig], options: CompareOptions) -> Result<ComparisonReport> {
    if grid.is_empty() || scenarios.is_empty() {
        return Err(Error::Config("comparison needs at least one cell and one scenario".into()));
    }
    let shift = grid[0].config.block_shift;
    let fs = grid[0].config.sample_rate;
    if grid.iter().any(|c| c.config.block_shift != shift || c.config.sample_rate != fs) {
        return Err(Error::Config("all grid cells must share block shift and sample rate".into()));
    }
    let block_secs = shift as f64 / fs as f64;

    let runs: Vec<Vec<CellRun>> = scenarios
        .par_iter()
        .map(|sc_cfg| -> Result<Vec<CellRun>> {
            let scenario = Scenario::generate(sc_cfg)?;
            let epc_sample = sc_cfg.epc_samples()?.first().copied().ok_or_else(|| {
                Error::Config("comparison scenarios need an echo path change".into())
            })?;
            grid.iter()
                .map(|cell| {
                    let (aec, out) = run_scenario(&cell.config, &scenario)?;
                    let report = evaluate(&aec, &scenario, &out, options.erle_smoothing)?;
                    Ok(CellRun {
                        series: report.erle_series,
                        epc_block: epc_sample / shift,
                        erle_avg: report.erle_avg,
                        erle_pf: report.erle_pf.unwrap_or(f64::NAN),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    // common window around the EPC across all scenarios
    let before = runs.iter().map(|r| r[0].epc_block).min().unwrap_or(0);
    let after = runs.iter().map(|r| r[0].series.len() - r[0].epc_block).min().unwrap_or(0);
    let offsets: Vec<i64> = (-(before as i64)..after as i64).collect();
    let steady_blocks = (options.steady_window / block_secs).round() as usize;

    let mut curves = Vec::with_capacity(grid.len());
    let mut cells = Vec::with_capacity(grid.len());
    for (c, cell) in grid.iter().enumerate() {
        let curve: Vec<f64> = offsets
            .iter()
            .map(|&off| {
                let vals: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r[c].series[(r[c].epc_block as i64 + off) as usize])
                    .collect();
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            })
            .collect();
        let (steady, recovery) = reconvergence(&curve, before, steady_blocks, block_secs, options.recovery_fraction);
        let n = runs.len() as f64;
        cells.push(CellSummary {
            label: cell.label.clone(),
            steady_state_db: steady,
            recovery_time_s: recovery,
            erle_avg_db: runs.iter().map(|r| r[c].erle_avg).sum::<f64>() / n,
            erle_pf_db: runs.iter().map(|r| r[c].erle_pf).sum::<f64>() / n,
        });
        curves.push(curve);
    }
    Ok(ComparisonReport { options, offsets, block_secs, curves, cells })
}
