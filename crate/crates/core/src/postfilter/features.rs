use crate::dsp::{stft_analyze, Complex, Dft};
use crate::error::{check_len, Error, Result};

/// Floor applied to the power spectra before taking the logarithm.
pub const LOG_POWER_FLOOR: f64 = 1e-12;

/// Per-feature normalization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl FeatureStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        check_len("feature std", mean.len(), std.len())?;
        if let Some(s) = std.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("feature std must be > 0, got {s}")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("feature mean must be finite".into()));
        }
        Ok(Self { mean, std })
    }

    /// Zero mean, unit deviation.
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            std: vec![1.0; len],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Normalized log-power features: `M/2 + 1` bins of the windowed prior
/// error followed by `M/2 + 1` bins of the windowed far-end block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// STFT frames feeding the feature extractor.
#[derive(Clone, Debug)]
pub struct FeatureFrames {
    /// Windowed DFT of `[e⁺_{τ−1}; e⁺_τ]`.
    pub error: Vec<Complex>,
    /// Windowed DFT of the newest `M` far-end samples.
    pub far_end: Vec<Complex>,
}

impl FeatureFrames {
    pub fn compute(
        dft: &Dft,
        e_prev: &[f64],
        e_cur: &[f64],
        far_end_block: &[f64],
        window: &[f64],
    ) -> Result<Self> {
        let m = dft.len();
        check_len("far-end feature block", m, far_end_block.len())?;
        let error = stft_analyze(dft, e_prev, e_cur, window)?;
        let mut far_end: Vec<Complex> = far_end_block
            .iter()
            .zip(window)
            .map(|(&x, &v)| Complex::new(x * v, 0.0))
            .collect();
        dft.forward_in_place(&mut far_end);
        Ok(Self { error, far_end })
    }

    /// `log(max(|ũ|², ε₁))` over the non-redundant bins of both frames.
    pub fn log_power(&self, eps1: f64) -> Vec<f64> {
        let half = self.error.len() / 2 + 1;
        self.error[..half]
            .iter()
            .chain(&self.far_end[..half])
            .map(|c| c.norm_sqr().max(eps1).ln())
            .collect()
    }
}

/// Applies `(x − μ) / σ` per feature.
pub fn normalize(raw: &[f64], stats: &FeatureStats) -> Result<FeatureVector> {
    check_len("feature statistics", raw.len(), stats.len())?;
    Ok(FeatureVector(
        raw.iter()
            .zip(&stats.mean)
            .zip(&stats.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect(),
    ))
}

/// Full feature chain from time-domain blocks.
pub fn compute_features(
    dft: &Dft,
    e_prev: &[f64],
    e_cur: &[f64],
    far_end_block: &[f64],
    window: &[f64],
    stats: &FeatureStats,
    eps1: f64,
) -> Result<FeatureVector> {
    if !(eps1 > 0.0) {
        return Err(Error::Config(format!("log floor must be > 0, got {eps1}")));
    }
    let frames = FeatureFrames::compute(dft, e_prev, e_cur, far_end_block, window)?;
    normalize(&frames.log_power(eps1), stats)
}
