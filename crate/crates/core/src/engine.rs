//! Per-block orchestration: prediction, mask, noise PSDs, Kalman update and
//! near-end synthesis.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dsp::{hamming, os_spectrum, stft_analyze, synthesis_window, BlockSpec, Complex, Dft, FarEndBuffer};
use crate::error::{check_len, Error, Result};
use crate::kalman::{compute_step_size, predict_echo, predict_uncertainty, KalmanState};
use crate::postfilter::{
    infer_mask, normalize, oracle_mask, FeatureFrames, MaskFrame, NearEndSynthesizer, NetworkWeights,
    RecurrentState, LOG_POWER_FLOOR, ORACLE_MASK_EPS,
};
use crate::psd::{
    observation_noise_psd, BaselineEstimator, DiagonalPsd, MinStatState, NearEndPsdState, ProcessNoiseState,
};

/// Source of the observation-noise PSD `Ψ^I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Mask-split near-end periodogram plus minimum-statistics noise floor.
    Proposed,
    /// Recursively averaged prior-error power.
    Baseline { alpha: f64 },
    /// Recursively averaged periodogram of the true interference
    /// (late echo, noise and near-end); needs ground truth.
    Oracle { smoothing: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSource {
    Unity,
    /// Clipped ideal amplitude mask from the true near-end; needs ground truth.
    Oracle,
    Network { weights: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub block_shift: usize,
    pub partitions: usize,
    pub sample_rate: u32,
    /// State transition coefficient `A`.
    pub transition: f64,
    pub lambda_s: f64,
    pub lambda_p: f64,
    pub lambda_w: f64,
    pub kappa: usize,
    pub eps1: f64,
    pub oracle_mask_eps: f64,
    pub initial_uncertainty: f64,
    /// Scale the echo prediction by `A` instead of one.
    pub predict_with_transition: bool,
    pub estimator: Estimator,
    pub mask: MaskSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            block_shift: 256,
            partitions: 8,
            sample_rate: 16_000,
            transition: 0.999,
            lambda_s: 0.0,
            lambda_p: 0.9,
            lambda_w: 0.9,
            kappa: 90,
            eps1: LOG_POWER_FLOOR,
            oracle_mask_eps: ORACLE_MASK_EPS,
            initial_uncertainty: 1.0,
            predict_with_transition: false,
            estimator: Estimator::Proposed,
            mask: MaskSource::Unity,
        }
    }
}

impl RunConfig {
    pub fn spec(&self) -> Result<BlockSpec> {
        BlockSpec::new(self.block_shift, self.partitions)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_p", self.lambda_p),
            ("lambda_w", self.lambda_w),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.kappa == 0 {
            return Err(Error::Config("kappa must be >= 1".into()));
        }
        if !(self.eps1 > 0.0) || !(self.oracle_mask_eps > 0.0) {
            return Err(Error::Config("eps1 and oracle_mask_eps must be > 0".into()));
        }
        match self.estimator {
            Estimator::Baseline { alpha: v } | Estimator::Oracle { smoothing: v } if !(0.0..1.0).contains(&v) => {
                Err(Error::Config(format!("estimator averaging factor must lie in [0, 1), got {v}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether oracle components require ground truth inputs.
    pub fn needs_truth(&self) -> bool {
        matches!(self.mask, MaskSource::Oracle) || matches!(self.estimator, Estimator::Oracle { .. })
    }
}

/// Ground-truth blocks for oracle masks and oracle noise PSDs.
#[derive(Clone, Copy, Debug)]
pub struct TruthBlock<'a> {
    pub near_end: &'a [f64],
    /// Everything the early-echo model cannot explain: late echo, noise and
    /// near-end.
    pub interference: &'a [f64],
}

/// Summary of one processed block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: usize,
    /// Energy of the time-domain prior error block.
    pub error_power: f64,
    pub mask: Vec<f64>,
    pub psi_s_mean: f64,
    pub psi_p_mean: f64,
    pub psi_i_mean: f64,
    pub echo_estimate: Vec<f64>,
    /// Near-end estimate released at this block; lags the input by one block.
    pub near_end_estimate: Vec<f64>,
    pub elapsed_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockLog {
    pub records: Vec<BlockRecord>,
}

impl BlockLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn block_times(&self) -> Vec<Duration> {
        self.records.iter().map(|r| Duration::from_secs_f64(r.elapsed_secs)).collect()
    }

    pub fn masks(&self) -> Result<Vec<MaskFrame>> {
        self.records.iter().map(|r| MaskFrame::new(r.mask.clone())).collect()
    }
}

/// Result of one block.
#[derive(Clone, Debug)]
pub struct BlockOutput {
    pub echo_estimate: Vec<f64>,
    pub prior_error: Vec<f64>,
    pub mask: MaskFrame,
    /// Near-end block `τ − 1`.
    pub near_end_estimate: Vec<f64>,
    /// Per-bin means of `Ψ^S`, `Ψ^P` and `Ψ^I`; estimators without a
    /// near-end split report their whole estimate as `Ψ^P`.
    pub psd_means: [f64; 3],
}

enum MaskProvider {
    Unity,
    Oracle,
    Network { weights: NetworkWeights, state: RecurrentState },
}

enum NoiseEstimator {
    Proposed { near_end: NearEndPsdState, floor: MinStatState },
    Baseline(BaselineEstimator),
    Oracle { psi: Option<DiagonalPsd>, smoothing: f64 },
}

/// Single-stream echo canceller.
pub struct EchoCanceller {
    config: RunConfig,
    spec: BlockSpec,
    dft: Dft,
    window: Vec<f64>,
    buffer: FarEndBuffer,
    kalman: KalmanState,
    process_noise: ProcessNoiseState,
    estimator: NoiseEstimator,
    masks: MaskProvider,
    synth: NearEndSynthesizer,
    error_prev: Vec<f64>,
    error_cur: Vec<f64>,
    prev_near_end: Vec<f64>,
    last_mask: MaskFrame,
    last_error_frame: Vec<Complex>,
    last_near_end_frame: Option<Vec<Complex>>,
    blocks: usize,
}

impl EchoCanceller {
    /// Builds a canceller; a network mask source loads its weights file.
    pub fn new(config: RunConfig) -> Result<Self> {
        let weights = match &config.mask {
            MaskSource::Network { weights } => Some(NetworkWeights::read(weights)?),
            _ => None,
        };
        Self::build(config, weights)
    }

    /// Builds a canceller around already loaded network weights.
    pub fn with_weights(config: RunConfig, weights: NetworkWeights) -> Result<Self> {
        Self::build(config, Some(weights))
    }

    fn build(config: RunConfig, weights: Option<NetworkWeights>) -> Result<Self> {
        config.validate()?;
        let spec = config.spec()?;
        let m = spec.dft_len();
        let dft = Dft::new(m);
        let window = hamming(m);
        let estimator = match config.estimator {
            Estimator::Proposed => NoiseEstimator::Proposed {
                near_end: NearEndPsdState::new(m, config.lambda_s)?,
                floor: MinStatState::new(config.lambda_p, config.kappa)?,
            },
            Estimator::Baseline { alpha } => NoiseEstimator::Baseline(BaselineEstimator::new(alpha)?),
            Estimator::Oracle { smoothing } => NoiseEstimator::Oracle { psi: None, smoothing },
        };
        // supplied weights take precedence over the configured mask source
        let masks = match (weights, &config.mask) {
            (Some(weights), _) => {
                let (input, output) = NetworkWeights::dims_for(m);
                check_len("network input for this block size", input, weights.input_dim)?;
                check_len("network output for this block size", output, weights.output_dim)?;
                let state = RecurrentState::zeros(weights.hidden_dim);
                MaskProvider::Network { weights, state }
            }
            (None, MaskSource::Unity) => MaskProvider::Unity,
            (None, MaskSource::Oracle) => MaskProvider::Oracle,
            (None, MaskSource::Network { .. }) => unreachable!("weights loaded by the constructor"),
        };
        Ok(Self {
            spec,
            kalman: KalmanState::with_uncertainty(spec, config.transition, config.initial_uncertainty)?,
            process_noise: ProcessNoiseState::new(spec.partitions(), m, config.lambda_w)?,
            buffer: FarEndBuffer::new(spec),
            synth: NearEndSynthesizer::new(dft.clone(), synthesis_window(&window))?,
            error_prev: vec![0.0; spec.shift()],
            error_cur: vec![0.0; spec.shift()],
            prev_near_end: vec![0.0; spec.shift()],
            last_mask: MaskFrame::ones(m),
            last_error_frame: vec![Complex::default(); m],
            last_near_end_frame: None,
            blocks: 0,
            estimator,
            masks,
            window,
            dft,
            config,
        })
    }

    pub fn spec(&self) -> BlockSpec {
        self.spec
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn kalman(&self) -> &KalmanState {
        &self.kalman
    }

    pub fn dft(&self) -> &Dft {
        &self.dft
    }

    pub fn analysis_window(&self) -> &[f64] {
        &self.window
    }

    pub fn blocks_processed(&self) -> usize {
        self.blocks
    }

    /// STFT frame of the most recent prior error.
    pub fn last_error_frame(&self) -> &[Complex] {
        &self.last_error_frame
    }

    /// STFT frame of the most recent true near-end block, when ground truth
    /// was supplied.
    pub fn last_near_end_frame(&self) -> Option<&[Complex]> {
        self.last_near_end_frame.as_deref()
    }

    /// Un-normalized log-power features of the most recent block.
    pub fn raw_features(&self) -> Result<Vec<f64>> {
        let frames = self.feature_frames()?;
        Ok(frames.log_power(self.config.eps1))
    }

    fn feature_frames(&self) -> Result<FeatureFrames> {
        FeatureFrames::compute(
            &self.dft,
            &self.error_prev,
            &self.error_cur,
            &self.buffer.newest_block(),
            &self.window,
        )
    }

    /// Releases the final near-end block by synthesizing one more frame of
    /// silence-padded prior error under the last mask.
    pub fn finish(&mut self) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.spec.shift()];
        let frame = stft_analyze(&self.dft, &self.error_cur, &zeros, &self.window)?;
        self.synth.push(&self.last_mask, &frame)
    }

    /// Processes one block of `R` far-end and microphone samples.
    pub fn process_block(&mut self, far_end: &[f64], mic: &[f64], truth: Option<TruthBlock<'_>>) -> Result<BlockOutput> {
        let index = self.blocks;
        let at_block = |e: Error| match e {
            Error::Numeric { context, .. } => Error::Numeric { context, block: index },
            e => e,
        };
        let r = self.spec.shift();
        check_len("microphone block", r, mic.len())?;
        if self.config.needs_truth() && truth.is_none() {
            return Err(Error::Config("oracle mask or oracle estimator needs ground truth".into()));
        }
        if let Some(t) = truth {
            check_len("near-end truth block", r, t.near_end.len())?;
            check_len("interference truth block", r, t.interference.len())?;
        }

        self.buffer.advance(&self.dft, far_end).map_err(at_block)?;
        let transition = self.kalman.transition();
        let psi_dw = self.process_noise.update(self.kalman.filters(), transition)?;

        let gain = if self.config.predict_with_transition { transition } else { 1.0 };
        let prediction = predict_echo(&self.kalman, &self.buffer, mic, gain, &self.dft).map_err(at_block)?;
        let e_spec = &prediction.error.spectrum;
        let e_time = &prediction.error.time;

        self.error_prev = std::mem::replace(&mut self.error_cur, e_time.clone());
        let error_frame = stft_analyze(&self.dft, &self.error_prev, &self.error_cur, &self.window)?;
        let near_end_frame = match truth {
            Some(t) => Some(stft_analyze(&self.dft, &self.prev_near_end, t.near_end, &self.window)?),
            None => None,
        };
        if let Some(t) = truth {
            self.prev_near_end.copy_from_slice(t.near_end);
        }

        let m = self.spec.dft_len();
        let mask = match &mut self.masks {
            MaskProvider::Unity => MaskFrame::ones(m),
            MaskProvider::Oracle => oracle_mask(
                near_end_frame.as_deref().expect("checked above"),
                &error_frame,
                self.config.oracle_mask_eps,
            )?,
            MaskProvider::Network { weights, state } => {
                let frames = FeatureFrames::compute(
                    &self.dft,
                    &self.error_prev,
                    &self.error_cur,
                    &self.buffer.newest_block(),
                    &self.window,
                )?;
                let features = normalize(&frames.log_power(self.config.eps1), &weights.stats)?;
                let (mask, next) = infer_mask(weights, &features, state)?;
                *state = next;
                mask
            }
        };

        let (psi_i, psi_s_mean, psi_p_mean) = match &mut self.estimator {
            NoiseEstimator::Proposed { near_end, floor } => {
                let psi_s = near_end.update(&mask, e_spec)?.clone();
                let psi_p = floor.update(&mask, e_spec)?;
                let psi_i = observation_noise_psd(&psi_s, &psi_p)?;
                (psi_i, psi_s.mean(), psi_p.mean())
            }
            NoiseEstimator::Baseline(est) => {
                let psi = est.update(e_spec)?.clone();
                let mean = psi.mean();
                (psi, 0.0, mean)
            }
            NoiseEstimator::Oracle { psi, smoothing } => {
                let t = truth.expect("checked above");
                let periodogram = DiagonalPsd::periodogram(&os_spectrum(&self.dft, t.interference)?);
                let next = match psi.take() {
                    Some(prev) => DiagonalPsd::new(
                        prev.values()
                            .iter()
                            .zip(periodogram.values())
                            .map(|(p, q)| *smoothing * p + (1.0 - *smoothing) * q)
                            .collect(),
                    )?,
                    None => periodogram,
                };
                let mean = next.mean();
                *psi = Some(next.clone());
                (next, 0.0, mean)
            }
        };

        let p_plus = predict_uncertainty(self.kalman.uncertainty(), &psi_dw, transition)?;
        let step = compute_step_size(&p_plus, &self.buffer, &psi_i, self.spec)?;
        self.kalman
            .update(&step, &self.buffer, e_spec, &p_plus, &self.dft)
            .map_err(at_block)?;

        let near_end_estimate = self.synth.push(&mask, &error_frame)?;
        self.last_error_frame = error_frame;
        self.last_mask = mask.clone();
        self.last_near_end_frame = near_end_frame;
        self.blocks += 1;
        Ok(BlockOutput {
            echo_estimate: prediction.echo.time,
            prior_error: prediction.error.time,
            mask,
            near_end_estimate,
            psd_means: [psi_s_mean, psi_p_mean, psi_i.mean()],
        })
    }
}

/// Whole-signal inputs; ground truth is optional unless an oracle is used.
#[derive(Clone, Copy, Debug)]
pub struct StreamInputs<'a> {
    pub far_end: &'a [f64],
    pub mic: &'a [f64],
    pub near_end: Option<&'a [f64]>,
    pub interference: Option<&'a [f64]>,
}

impl<'a> StreamInputs<'a> {
    pub fn new(far_end: &'a [f64], mic: &'a [f64]) -> Self {
        Self { far_end, mic, near_end: None, interference: None }
    }

    pub fn with_truth(mut self, near_end: &'a [f64], interference: &'a [f64]) -> Self {
        self.near_end = Some(near_end);
        self.interference = Some(interference);
        self
    }
}

/// Signals and log of a whole run, aligned with the input.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub echo_estimate: Vec<f64>,
    pub prior_error: Vec<f64>,
    pub near_end_estimate: Vec<f64>,
    pub masks: Vec<MaskFrame>,
    pub log: BlockLog,
}

impl RunOutput {
    /// Rebuilds a run from its block log and the microphone signal it
    /// processed. The final near-end block, released only by
    /// [`EchoCanceller::finish`], is not logged and comes back as zeros.
    pub fn from_log(log: BlockLog, mic: &[f64]) -> Result<Self> {
        let n = mic.len();
        let shift = log.records.first().map_or(0, |r| r.echo_estimate.len());
        check_len("logged blocks", n.div_ceil(shift.max(1)), log.len())?;
        let mut echo_estimate: Vec<f64> = log.records.iter().flat_map(|r| r.echo_estimate.iter().copied()).collect();
        let mut near_end_estimate: Vec<f64> =
            log.records.iter().skip(1).flat_map(|r| r.near_end_estimate.iter().copied()).collect();
        echo_estimate.truncate(n);
        near_end_estimate.resize(n, 0.0);
        let prior_error = mic.iter().zip(&echo_estimate).map(|(y, d)| y - d).collect();
        Ok(Self { echo_estimate, prior_error, near_end_estimate, masks: log.masks()?, log })
    }
}

fn padded(x: &[f64], len: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    v.resize(len, 0.0);
    v
}

/// Runs a canceller over whole signals. Inputs are zero-padded to whole
/// blocks and outputs truncated back to the input length.
pub fn process_stream(canceller: &mut EchoCanceller, inputs: StreamInputs<'_>) -> Result<RunOutput> {
    let n = inputs.mic.len();
    check_len("far-end signal", n, inputs.far_end.len())?;
    if let Some(s) = inputs.near_end {
        check_len("near-end truth", n, s.len())?;
    }
    if let Some(i) = inputs.interference {
        check_len("interference truth", n, i.len())?;
    }
    let r = canceller.spec().shift();
    let total = n.div_ceil(r) * r;
    let far = padded(inputs.far_end, total);
    let mic = padded(inputs.mic, total);
    let truth = match (inputs.near_end, inputs.interference) {
        (Some(s), Some(i)) => Some((padded(s, total), padded(i, total))),
        _ => None,
    };

    let mut out = RunOutput {
        echo_estimate: Vec::with_capacity(total),
        prior_error: Vec::with_capacity(total),
        near_end_estimate: Vec::with_capacity(total + r),
        masks: Vec::with_capacity(total / r),
        log: BlockLog::default(),
    };
    for k in 0..total / r {
        let span = k * r..(k + 1) * r;
        let block_truth = truth.as_ref().map(|(s, i)| TruthBlock {
            near_end: &s[span.clone()],
            interference: &i[span.clone()],
        });
        let start = Instant::now();
        let block = canceller.process_block(&far[span.clone()], &mic[span.clone()], block_truth)?;
        let elapsed = start.elapsed();
        if k > 0 {
            out.near_end_estimate.extend_from_slice(&block.near_end_estimate);
        }
        out.echo_estimate.extend_from_slice(&block.echo_estimate);
        out.prior_error.extend_from_slice(&block.prior_error);
        out.log.records.push(BlockRecord {
            index: k,
            error_power: block.prior_error.iter().map(|v| v * v).sum(),
            mask: block.mask.gains().to_vec(),
            psi_s_mean: block.psd_means[0],
            psi_p_mean: block.psd_means[1],
            psi_i_mean: block.psd_means[2],
            echo_estimate: block.echo_estimate,
            near_end_estimate: block.near_end_estimate,
            elapsed_secs: elapsed.as_secs_f64(),
        });
        out.masks.push(block.mask);
    }
    if total > 0 {
        out.near_end_estimate.extend(canceller.finish()?);
    }
    out.echo_estimate.truncate(n);
    out.prior_error.truncate(n);
    out.near_end_estimate.truncate(n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{white_noise, Scenario, ScenarioConfig, SourceKind};

    #[test]
    fn run_output_round_trips_through_log() {
        let sc = small_scenario(Some(0.0), 21);
        let inter = interference(&sc);
        let mut aec = EchoCanceller::new(small_config()).unwrap();
        let out = process_stream(&mut aec, StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter)).unwrap();
        let json = serde_json::to_string(&out.log).unwrap();
        let back = RunOutput::from_log(serde_json::from_str(&json).unwrap(), &sc.mic).unwrap();
        assert_eq!(back.echo_estimate, out.echo_estimate);
        assert_eq!(back.masks, out.masks);
        let tail = sc.len() - 64;
        assert_eq!(back.near_end_estimate[..tail], out.near_end_estimate[..tail]);
        for (a, b) in back.prior_error.iter().zip(&out.prior_error) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(RunOutput::from_log(back.log, &sc.mic[..sc.len() / 2]).is_err());
    }

    fn small_config() -> RunConfig {
        RunConfig { block_shift: 64, partitions: 4, ..Default::default() }
    }

    fn small_scenario(ner: Option<f64>, seed: u64) -> Scenario {
        Scenario::generate(&ScenarioConfig {
            duration: 3.0,
            filter_len: 256,
            rir_len: 256,
            rir_t60: 0.05,
            block_shift: 64,
            ner_db: ner,
            seed,
            far_end: SourceKind::WhiteNoise,
            ..Default::default()
        })
        .unwrap()
    }

    fn interference(sc: &Scenario) -> Vec<f64> {
        sc.mic.iter().zip(&sc.echo_early).map(|(y, d)| y - d).collect()
    }

    #[test]
    fn unity_mask_passes_near_end_when_far_end_silent() {
        let s = white_noise(64 * 50 + 17, 3);
        let far = vec![0.0; s.len()];
        let mut aec = EchoCanceller::new(small_config()).unwrap();
        let out = process_stream(&mut aec, StreamInputs::new(&far, &s)).unwrap();
        assert_eq!(out.near_end_estimate.len(), s.len());
        let err = s
            .iter()
            .zip(&out.near_end_estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
        assert!(out.echo_estimate.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn runs_are_bit_identical() {
        let sc = small_scenario(Some(0.0), 2);
        let inter = interference(&sc);
        let cfg = RunConfig { mask: MaskSource::Oracle, ..small_config() };
        let run = || {
            let mut aec = EchoCanceller::new(cfg.clone()).unwrap();
            let inputs = StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter);
            process_stream(&mut aec, inputs).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.near_end_estimate, b.near_end_estimate);
        assert_eq!(a.echo_estimate, b.echo_estimate);
        assert_eq!(a.masks, b.masks);
        for (x, y) in a.log.records.iter().zip(&b.log.records) {
            assert_eq!(
                (x.error_power, &x.mask, x.psi_i_mean, &x.echo_estimate),
                (y.error_power, &y.mask, y.psi_i_mean, &y.echo_estimate)
            );
        }
    }

    #[test]
    fn oracle_needs_truth() {
        let x = vec![0.1; 128];
        let cfg = RunConfig { mask: MaskSource::Oracle, ..small_config() };
        let mut aec = EchoCanceller::new(cfg).unwrap();
        assert!(matches!(
            process_stream(&mut aec, StreamInputs::new(&x, &x)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_config_rejected_before_processing() {
        for cfg in [
            RunConfig { lambda_p: 1.0, ..small_config() },
            RunConfig { kappa: 0, ..small_config() },
            RunConfig { transition: 1.0, ..small_config() },
            RunConfig { block_shift: 0, ..small_config() },
            RunConfig { estimator: Estimator::Baseline { alpha: -0.1 }, ..small_config() },
        ] {
            assert!(EchoCanceller::new(cfg).is_err());
        }
    }

    #[test]
    fn nan_input_reports_block_index() {
        let mut far = vec![0.1; 64 * 5];
        far[64 * 3 + 2] = f64::NAN;
        let mic = vec![0.0; far.len()];
        let mut aec = EchoCanceller::new(small_config()).unwrap();
        match process_stream(&mut aec, StreamInputs::new(&far, &mic)) {
            Err(Error::Numeric { block, .. }) => assert_eq!(block, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_estimator_cancels_echo_without_near_end() {
        let sc = small_scenario(None, 5);
        let inter = interference(&sc);
        for estimator in [
            Estimator::Proposed,
            Estimator::Baseline { alpha: 0.5 },
            Estimator::Oracle { smoothing: 0.9 },
        ] {
            let cfg = RunConfig { estimator: estimator.clone(), mask: MaskSource::Oracle, ..small_config() };
            let mut aec = EchoCanceller::new(cfg).unwrap();
            let inputs = StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter);
            let out = process_stream(&mut aec, inputs).unwrap();
            let tail = sc.len() - 16_000;
            let d: f64 = sc.echo[tail..].iter().map(|v| v * v).sum();
            let res: f64 = sc.echo[tail..]
                .iter()
                .zip(&out.echo_estimate[tail..])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let erle = 10.0 * (d / res).log10();
            assert!(erle > 15.0, "{estimator:?}: {erle} dB");
        }
    }

    #[test]
    fn filter_stays_in_constraint_image() {
        let sc = small_scenario(Some(0.0), 7);
        let cfg = small_config();
        let mut aec = EchoCanceller::new(cfg).unwrap();
        process_stream(&mut aec, StreamInputs::new(&sc.far_end[..6400], &sc.mic[..6400])).unwrap();
        let dft = aec.dft().clone();
        for w in aec.kalman().filters() {
            let t = dft.inverse(w).unwrap();
            assert!(t[64..].iter().all(|c| c.norm() < 1e-10));
        }
        assert!(aec.kalman().uncertainty().iter().flatten().all(|&p| p >= 0.0));
    }

    #[test]
    fn network_mask_matches_zero_weights() {
        let (input, output) = NetworkWeights::dims_for(128);
        let weights = NetworkWeights::zeros(input, 8, output);
        let mut aec = EchoCanceller::with_weights(small_config(), weights).unwrap();
        let x = white_noise(640, 1);
        let out = process_stream(&mut aec, StreamInputs::new(&x, &x)).unwrap();
        assert!(out.masks.iter().all(|m| m.gains().iter().all(|&g| g == 0.5)));
        assert_eq!(aec.raw_features().unwrap().len(), input);

        let wrong = NetworkWeights::zeros(10, 8, 5);
        assert!(EchoCanceller::with_weights(small_config(), wrong).is_err());
    }
}
