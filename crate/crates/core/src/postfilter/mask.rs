use crate::dsp::{analyze_signal, mirror_half_spectrum, Complex, Dft, StftSynthesizer};
use crate::error::{check_len, Error, Result};

/// Default regularizer of the oracle mask denominator.
pub const ORACLE_MASK_EPS: f64 = 1e-10;

/// Per-bin gains in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskFrame(Vec<f64>);

impl MaskFrame {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if let Some(g) = gains.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!("mask gains must lie in [0, 1], got {g}")));
        }
        Ok(Self(gains))
    }

    pub fn constant(len: usize, gain: f64) -> Result<Self> {
        Self::new(vec![gain; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Builds a full-length mask from the `M/2 + 1` non-redundant gains.
    pub fn from_half(half: &[f64], dft_len: usize) -> Result<Self> {
        check_len("half-spectrum mask", dft_len / 2 + 1, half.len())?;
        Self::new(mirror_half_spectrum(half, dft_len))
    }

    pub fn gains(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }
}

/// Clipped ideal amplitude mask `min(|s̃| / (|ẽ⁺| + eps), 1)`.
pub fn oracle_mask(near_end_frame: &[Complex], error_frame: &[Complex], eps: f64) -> Result<MaskFrame> {
    check_len("oracle mask error frame", near_end_frame.len(), error_frame.len())?;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("oracle mask eps must be > 0, got {eps}")));
    }
    Ok(MaskFrame(
        near_end_frame
            .iter()
            .zip(error_frame)
            .map(|(s, e)| (s.norm() / (e.norm() + eps)).min(1.0))
            .collect(),
    ))
}

/// Element-wise masking of an overlap-save domain spectrum.
pub fn apply_mask_os(mask: &MaskFrame, spectrum: &[Complex]) -> Result<Vec<Complex>> {
    check_len("masked spectrum", mask.len(), spectrum.len())?;
    Ok(spectrum.iter().zip(&mask.0).map(|(e, g)| e * g).collect())
}

/// Masks STFT frames of the prior error and overlap-adds the near-end
/// estimate. Output lags the input by one block.
#[derive(Clone, Debug)]
pub struct NearEndSynthesizer {
    synth: StftSynthesizer,
}

impl NearEndSynthesizer {
    pub fn new(dft: Dft, synthesis_window: Vec<f64>) -> Result<Self> {
        Ok(Self {
            synth: StftSynthesizer::new(dft, synthesis_window)?,
        })
    }

    /// Pushes `M̂ ⊙ ẽ⁺` for frame `k` and returns output block `k − 1`.
    pub fn push(&mut self, mask: &MaskFrame, error_frame: &[Complex]) -> Result<Vec<f64>> {
        let masked = apply_mask_os(mask, error_frame)?;
        self.synth.push(&masked)
    }
}

/// Near-end synthesis of a whole frame sequence; the result is aligned with
/// the analysed signal and has `frames.len() - 1` blocks.
pub fn synthesize_near_end(
    masks: &[MaskFrame],
    error_frames: &[Vec<Complex>],
    dft: &Dft,
    synthesis_window: &[f64],
) -> Result<Vec<f64>> {
    check_len("mask sequence", error_frames.len(), masks.len())?;
    let mut synth = NearEndSynthesizer::new(dft.clone(), synthesis_window.to_vec())?;
    let mut out = Vec::new();
    for (k, (mask, frame)) in masks.iter().zip(error_frames).enumerate() {
        let block = synth.push(mask, frame)?;
        if k > 0 {
            out.extend(block);
        }
    }
    Ok(out)
}

/// Applies a recorded mask sequence to an arbitrary signal (the `pf(·)`
/// operator of the evaluation metrics). Mask `k` is applied to the frame
/// covering blocks `k − 1` and `k`; the trailing flush frame reuses the last
/// mask. Output has the signal's length.
pub fn replay_masks(
    signal: &[f64],
    masks: &[MaskFrame],
    dft: &Dft,
    analysis_window: &[f64],
    synthesis_window: &[f64],
) -> Result<Vec<f64>> {
    let r = dft.len() / 2;
    let blocks = signal.len().div_ceil(r);
    if masks.len() < blocks {
        return Err(Error::Config(format!(
            "mask log holds {} frames, signal needs {blocks}",
            masks.len()
        )));
    }
    let frames = analyze_signal(dft, signal, analysis_window)?;
    let mut sequence: Vec<MaskFrame> = masks[..blocks].to_vec();
    sequence.push(sequence.last().cloned().unwrap_or_else(|| MaskFrame::ones(dft.len())));
    let mut out = synthesize_near_end(&sequence, &frames, dft, synthesis_window)?;
    out.truncate(signal.len());
    Ok(out)
}
