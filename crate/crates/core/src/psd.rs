//! Observation- and process-noise PSD estimation.
//!
//! The observation-noise PSD driving the Kalman step size is assembled from
//! two parts with very different dynamics: the near-end PSD, taken from the
//! instantaneous periodogram of the masked prior error, and a slowly varying
//! floor (late echo plus background noise) tracked by minimum statistics on
//! the complementary part of the prior error. The recursively averaged
//! prior-error power used by conventional Kalman echo cancellers is kept as
//! [`BaselineEstimator`] for comparison.

use std::collections::VecDeque;

use crate::dsp::Complex;
use crate::error::{check_len, Error, Result};
use crate::postfilter::MaskFrame;

/// Nonnegative, finite power per bin.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPsd(Vec<f64>);

impl DiagonalPsd {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("PSD entries must be finite and >= 0, got {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// `|x[m]|²` per bin.
    pub fn periodogram(spectrum: &[Complex]) -> Self {
        Self(spectrum.iter().map(|c| c.norm_sqr()).collect())
    }

    pub fn values(&self) -> &[f64] {
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

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn smooth_toward(&mut self, target: impl Iterator<Item = f64>, factor: f64) {
        for (v, t) in self.0.iter_mut().zip(target) {
            *v = factor * *v + (1.0 - factor) * t;
        }
    }
}

fn check_factor(name: &str, factor: f64) -> Result<()> {
    if (0.0..1.0).contains(&factor) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1), got {factor}")))
    }
}

/// Recursively averaged periodogram of the masked prior error.
#[derive(Clone, Debug)]
pub struct NearEndPsdState {
    psi: DiagonalPsd,
    smoothing: f64,
}

impl NearEndPsdState {
    pub fn new(len: usize, smoothing: f64) -> Result<Self> {
        check_factor("near-end smoothing", smoothing)?;
        Ok(Self {
            psi: DiagonalPsd::zeros(len),
            smoothing,
        })
    }

    pub fn psd(&self) -> &DiagonalPsd {
        &self.psi
    }

    pub fn update(&mut self, mask: &MaskFrame, prior_error: &[Complex]) -> Result<&DiagonalPsd> {
        check_len("mask", self.psi.len(), mask.len())?;
        check_len("prior error", self.psi.len(), prior_error.len())?;
        let masked = mask.gains().iter().zip(prior_error).map(|(g, e)| (e * g).norm_sqr());
        self.psi.smooth_toward(masked, self.smoothing);
        Ok(&self.psi)
    }
}

/// Minimum statistics over a smoothed periodogram of `(1 − mask)·e⁺`.
#[derive(Clone, Debug)]
pub struct MinStatState {
    smoothed: Option<DiagonalPsd>,
    window: VecDeque<Vec<f64>>,
    smoothing: f64,
    kappa: usize,
}

impl MinStatState {
    pub fn new(smoothing: f64, kappa: usize) -> Result<Self> {
        check_factor("noise-floor smoothing", smoothing)?;
        if kappa == 0 {
            return Err(Error::Config("minimum-statistics window must hold >= 1 frame".into()));
        }
        Ok(Self {
            smoothed: None,
            window: VecDeque::with_capacity(kappa),
            smoothing,
            kappa,
        })
    }

    /// Current smoothed periodogram, `None` before the first frame.
    pub fn smoothed(&self) -> Option<&DiagonalPsd> {
        self.smoothed.as_ref()
    }

    pub fn frames_held(&self) -> usize {
        self.window.len()
    }

    /// Ingests one frame and returns the per-bin minimum over the stored
    /// smoothed periodograms.
    pub fn update(&mut self, mask: &MaskFrame, prior_error: &[Complex]) -> Result<DiagonalPsd> {
        check_len("mask", mask.len(), prior_error.len())?;
        let residual = mask
            .gains()
            .iter()
            .zip(prior_error)
            .map(|(g, e)| (e * (1.0 - g)).norm_sqr());
        match &mut self.smoothed {
            Some(s) => {
                check_len("prior error", s.len(), prior_error.len())?;
                s.smooth_toward(residual, self.smoothing);
            }
            // cold start from the first frame rather than from zero
            None => self.smoothed = Some(DiagonalPsd(residual.collect())),
        }
        let current = self.smoothed.as_ref().expect("initialised above");
        if self.window.len() == self.kappa {
            self.window.pop_front();
        }
        self.window.push_back(current.0.clone());

        let mut min = current.0.clone();
        for frame in &self.window {
            for (m, &v) in min.iter_mut().zip(frame) {
                if v < *m {
                    *m = v;
                }
            }
        }
        Ok(DiagonalPsd(min))
    }
}

/// `Ψ^I = Ψ^P + Ψ^S`.
pub fn observation_noise_psd(psi_s: &DiagonalPsd, psi_p: &DiagonalPsd) -> Result<DiagonalPsd> {
    check_len("noise floor PSD", psi_s.len(), psi_p.len())?;
    Ok(DiagonalPsd(
        psi_s.0.iter().zip(&psi_p.0).map(|(a, b)| a + b).collect(),
    ))
}

/// Recursive estimate of `E[ŵ_b ŵ_bᴴ]` diagonals, scaled by `1 − A²` to
/// give the process-noise PSD.
#[derive(Clone, Debug)]
pub struct ProcessNoiseState {
    psi_w: Vec<DiagonalPsd>,
    smoothing: f64,
}

impl ProcessNoiseState {
    pub fn new(partitions: usize, len: usize, smoothing: f64) -> Result<Self> {
        check_factor("process-noise smoothing", smoothing)?;
        Ok(Self {
            psi_w: vec![DiagonalPsd::zeros(len); partitions],
            smoothing,
        })
    }

    pub fn filter_power(&self) -> &[DiagonalPsd] {
        &self.psi_w
    }

    /// Updates with the previous filter means and returns `Ψ^ΔW_b`.
    pub fn update(&mut self, w_hat_prev: &[Vec<Complex>], transition: f64) -> Result<Vec<DiagonalPsd>> {
        check_len("filter partitions", self.psi_w.len(), w_hat_prev.len())?;
        let scale = 1.0 - transition * transition;
        self.psi_w
            .iter_mut()
            .zip(w_hat_prev)
            .map(|(psi, w)| {
                check_len("filter bins", psi.len(), w.len())?;
                psi.smooth_toward(w.iter().map(|c| c.norm_sqr()), self.smoothing);
                Ok(DiagonalPsd(psi.0.iter().map(|v| scale * v).collect()))
            })
            .collect()
    }
}

/// One step of recursive averaging of the prior-error power:
/// `ψ ← α·ψ + (1 − α)·|e⁺|²`.
pub fn baseline_observation_noise(state: &DiagonalPsd, prior_error: &[Complex], alpha: f64) -> Result<DiagonalPsd> {
    check_len("prior error", state.len(), prior_error.len())?;
    let mut out = state.clone();
    out.smooth_toward(prior_error.iter().map(|e| e.norm_sqr()), alpha);
    Ok(out)
}

/// Conventional observation-noise estimator: recursively averaged prior-error
/// power, seeded with the first frame.
#[derive(Clone, Debug)]
pub struct BaselineEstimator {
    psi: Option<DiagonalPsd>,
    alpha: f64,
}

impl BaselineEstimator {
    /// Averaging factor used by the reference method.
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn new(alpha: f64) -> Result<Self> {
        check_factor("baseline averaging factor", alpha)?;
        Ok(Self { psi: None, alpha })
    }

    pub fn update(&mut self, prior_error: &[Complex]) -> Result<&DiagonalPsd> {
        let next = match &self.psi {
            Some(prev) => baseline_observation_noise(prev, prior_error, self.alpha)?,
            None => DiagonalPsd::periodogram(prior_error),
        };
        Ok(self.psi.insert(next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn psd_rejects_negative_and_nan() {
        assert!(DiagonalPsd::new(vec![1.0, -0.1]).is_err());
        assert!(DiagonalPsd::new(vec![f64::NAN]).is_err());
        assert!(DiagonalPsd::new(vec![0.0, 3.0]).is_ok());
    }

    #[test]
    fn instantaneous_near_end_psd() {
        let mut st = NearEndPsdState::new(2, 0.0).unwrap();
        let mask = MaskFrame::new(vec![0.5, 1.0]).unwrap();
        st.update(&mask, &[c(2.0), Complex::new(0.0, 3.0)]).unwrap();
        assert_eq!(st.psd().values(), &[1.0, 9.0]);
    }

    #[test]
    fn zero_mask_decays_near_end_psd() {
        let mut st = NearEndPsdState::new(1, 0.7).unwrap();
        st.update(&MaskFrame::ones(1), &[c(10.0)]).unwrap();
        let before = st.psd().values()[0];
        st.update(&MaskFrame::zeros(1), &[c(10.0)]).unwrap();
        assert!((st.psd().values()[0] - 0.7 * before).abs() < 1e-12);
    }

    #[test]
    fn unit_mask_gives_error_periodogram() {
        let mut st = NearEndPsdState::new(3, 0.0).unwrap();
        let e = [c(1.0), Complex::new(1.0, 1.0), c(-3.0)];
        st.update(&MaskFrame::ones(3), &e).unwrap();
        assert_eq!(st.psd().values(), &[1.0, 2.0, 9.0]);
    }

    #[test]
    fn noise_floor_tracks_constant_power() {
        let mut st = MinStatState::new(0.9, 10).unwrap();
        let e = [c(2.0), c(-2.0)];
        let mut last = DiagonalPsd::zeros(2);
        for _ in 0..25 {
            last = st.update(&MaskFrame::zeros(2), &e).unwrap();
        }
        for v in last.values() {
            assert!((v - 4.0).abs() < 1e-12);
        }
        assert_eq!(st.frames_held(), 10);
    }

    #[test]
    fn noise_floor_decays_under_full_mask() {
        let (lambda, kappa) = (0.9, 5);
        let mut st = MinStatState::new(lambda, kappa).unwrap();
        st.update(&MaskFrame::zeros(1), &[c(3.0)]).unwrap();
        for k in 1..=3 * kappa {
            let psi = st.update(&MaskFrame::ones(1), &[c(3.0)]).unwrap();
            let expected = 9.0 * lambda.powi(k as i32);
            assert!((psi.values()[0] - expected).abs() < 1e-12 * 9.0);
        }
    }

    #[test]
    fn observation_noise_is_sum() {
        let a = DiagonalPsd::new(vec![1.0, 2.0]).unwrap();
        let b = DiagonalPsd::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(observation_noise_psd(&a, &b).unwrap().values(), &[4.0, 6.0]);
        let z = DiagonalPsd::zeros(2);
        assert_eq!(observation_noise_psd(&z, &b).unwrap(), b);
        assert_eq!(observation_noise_psd(&z, &z).unwrap(), z);
    }

    #[test]
    fn static_zero_filter_has_no_process_noise() {
        let mut st = ProcessNoiseState::new(2, 3, 0.9).unwrap();
        let w = vec![vec![Complex::default(); 3]; 2];
        for _ in 0..5 {
            let q = st.update(&w, 0.99).unwrap();
            assert!(q.iter().all(|p| p.values().iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn unit_transition_limit_has_no_process_noise() {
        let mut st = ProcessNoiseState::new(1, 2, 0.9).unwrap();
        let w = vec![vec![c(5.0), c(-1.0)]];
        let q = st.update(&w, 1.0).unwrap();
        assert!(q[0].values().iter().all(|&v| v == 0.0));
        assert!(st.filter_power()[0].values()[0] > 0.0);
    }

    #[test]
    fn process_noise_geometric_recursion() {
        let mut st = ProcessNoiseState::new(1, 1, 0.9).unwrap();
        let w = vec![vec![c(2.0)]];
        let a: f64 = 0.95;
        for k in 1..=20 {
            let q = st.update(&w, a).unwrap();
            let psi_w = 4.0 * (1.0 - 0.9f64.powi(k));
            assert!((st.filter_power()[0].values()[0] - psi_w).abs() < 1e-12);
            assert!((q[0].values()[0] - (1.0 - a * a) * psi_w).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_arithmetic() {
        let out = baseline_observation_noise(&DiagonalPsd::new(vec![2.0]).unwrap(), &[c(2.0)], 0.5).unwrap();
        assert_eq!(out.values(), &[3.0]);
    }

    #[test]
    fn baseline_converges_and_halves() {
        let mut est = BaselineEstimator::new(0.5).unwrap();
        assert_eq!(est.update(&[c(3.0)]).unwrap().values(), &[9.0]);
        let mut v = 9.0;
        for _ in 0..10 {
            v *= 0.5;
            assert_eq!(est.update(&[c(0.0)]).unwrap().values(), &[v]);
        }
        let mut est = BaselineEstimator::new(0.5).unwrap();
        est.update(&[c(0.0)]).unwrap();
        let mut last = 0.0;
        for _ in 0..60 {
            last = est.update(&[c(2.0)]).unwrap().values()[0];
        }
        assert!((last - 4.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_factor_validation() {
        assert!(NearEndPsdState::new(4, 1.0).is_err());
        assert!(MinStatState::new(0.9, 0).is_err());
        assert!(BaselineEstimator::new(-0.1).is_err());
    }
}
