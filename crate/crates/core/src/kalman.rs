//! Diagonalized partitioned-block Kalman filter.
//!
//! One block of adaptation runs as
//! [`predict_echo`] → [`predict_uncertainty`] → [`compute_step_size`] →
//! [`KalmanState::update`], with the observation- and process-noise PSDs
//! supplied by [`crate::psd`] in between.

use crate::dsp::{
    gradient_constrain_in_place, os_spectrum, pbc_early_echo, BlockSpec, Complex, Dft,
    EchoEstimate, FarEndBuffer,
};
use crate::error::{check_len, Error, Result};
use crate::psd::DiagonalPsd;

/// Regularizer added to the step-size denominator so silent far-end and
/// zero observation noise never divide by zero.
pub const STEP_SIZE_REGULARIZER: f64 = 1e-10;

/// Posterior of the filter partitions: means `ŵ_b` and diagonal
/// uncertainties `P_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    w_hat: Vec<Vec<Complex>>,
    p_diag: Vec<Vec<f64>>,
    transition: f64,
}

impl KalmanState {
    /// Zero filter with unit prior uncertainty in every bin.
    pub fn new(spec: BlockSpec, transition: f64) -> Result<Self> {
        Self::with_uncertainty(spec, transition, 1.0)
    }

    pub fn with_uncertainty(spec: BlockSpec, transition: f64, p0: f64) -> Result<Self> {
        if !(transition > 0.0 && transition < 1.0) {
            return Err(Error::Config(format!(
                "state transition coefficient must lie in (0, 1), got {transition}"
            )));
        }
        if !(p0.is_finite() && p0 >= 0.0) {
            return Err(Error::Config(format!("initial uncertainty must be >= 0, got {p0}")));
        }
        let m = spec.dft_len();
        let b = spec.partitions();
        Ok(Self {
            w_hat: vec![vec![Complex::default(); m]; b],
            p_diag: vec![vec![p0; m]; b],
            transition,
        })
    }

    pub fn filters(&self) -> &[Vec<Complex>] {
        &self.w_hat
    }

    pub fn uncertainty(&self) -> &[Vec<f64>] {
        &self.p_diag
    }

    pub fn transition(&self) -> f64 {
        self.transition
    }

    /// Replaces the filter means, e.g. to start from a known echo path.
    pub fn set_filters(&mut self, filters: Vec<Vec<Complex>>) -> Result<()> {
        check_len("filter partitions", self.w_hat.len(), filters.len())?;
        for f in &filters {
            check_len("filter partition length", self.p_diag[0].len(), f.len())?;
        }
        self.w_hat = filters;
        Ok(())
    }

    /// Applies the constrained mean update and the uncertainty update.
    pub fn update(
        &mut self,
        step: &StepSize,
        buffer: &FarEndBuffer,
        prior_error: &[Complex],
        p_plus: &[Vec<f64>],
        dft: &Dft,
    ) -> Result<()> {
        let spec = buffer.spec();
        let m = spec.dft_len();
        check_len("step size partitions", self.w_hat.len(), step.lambda.len())?;
        check_len("prior uncertainty partitions", self.w_hat.len(), p_plus.len())?;
        check_len("prior error", m, prior_error.len())?;
        let ratio = spec.shift() as f64 / m as f64;
        let mut grad = vec![Complex::default(); m];
        for (b, x) in buffer.partitions().enumerate() {
            let lambda = &step.lambda[b];
            for (((g, &l), &xv), &e) in grad.iter_mut().zip(lambda).zip(x).zip(prior_error) {
                *g = xv.conj() * e * l;
            }
            gradient_constrain_in_place(dft, &mut grad);
            for (w, g) in self.w_hat[b].iter_mut().zip(&grad) {
                *w += g;
            }
            for (((p, &pp), &l), &xv) in self.p_diag[b].iter_mut().zip(&p_plus[b]).zip(lambda).zip(x) {
                let factor = 1.0 - ratio * l * xv.norm_sqr();
                *p = (factor * pp).max(0.0);
            }
        }
        if self.w_hat.iter().flatten().any(|w| !w.is_finite())
            || self.p_diag.iter().flatten().any(|p| !p.is_finite())
        {
            return Err(Error::Numeric {
                context: "kalman update",
                block: 0,
            });
        }
        Ok(())
    }
}

/// Diagonal step-size matrices `Λ_b`, one real `M`-vector per partition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSize {
    pub lambda: Vec<Vec<f64>>,
}

/// Prior error in the time and overlap-save domains.
#[derive(Clone, Debug)]
pub struct PriorError {
    pub time: Vec<f64>,
    pub spectrum: Vec<Complex>,
}

/// Output of the prediction step.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub echo: EchoEstimate,
    pub error: PriorError,
}

/// Early-echo prediction from the previous filter and the prior error
/// `e⁺ = y − d̂_early`. `gain` scales the echo prediction; the canonical
/// diagonalized filter uses `1.0`.
pub fn predict_echo(
    state: &KalmanState,
    buffer: &FarEndBuffer,
    mic_block: &[f64],
    gain: f64,
    dft: &Dft,
) -> Result<Prediction> {
    let spec = buffer.spec();
    check_len("microphone block", spec.shift(), mic_block.len())?;
    if mic_block.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "microphone block",
            block: 0,
        });
    }
    let mut echo = pbc_early_echo(&state.w_hat, buffer, dft)?;
    if gain != 1.0 {
        echo.time.iter_mut().for_each(|v| *v *= gain);
        echo.spectrum.iter_mut().for_each(|v| *v *= gain);
    }
    let time: Vec<f64> = mic_block.iter().zip(&echo.time).map(|(y, d)| y - d).collect();
    let mic_spectrum = os_spectrum(dft, mic_block)?;
    let spectrum = mic_spectrum
        .iter()
        .zip(&echo.spectrum)
        .map(|(y, d)| y - d)
        .collect();
    Ok(Prediction {
        echo,
        error: PriorError { time, spectrum },
    })
}

/// `P⁺_b = A²·P_b + Ψ^ΔW_b`, element-wise.
pub fn predict_uncertainty(
    p_diag: &[Vec<f64>],
    process_noise: &[DiagonalPsd],
    transition: f64,
) -> Result<Vec<Vec<f64>>> {
    check_len("process noise partitions", p_diag.len(), process_noise.len())?;
    let a2 = transition * transition;
    p_diag
        .iter()
        .zip(process_noise)
        .map(|(p, q)| {
            check_len("process noise bins", p.len(), q.len())?;
            Ok(p.iter().zip(q.values()).map(|(&p, &q)| a2 * p + q).collect())
        })
        .collect()
}

/// Prediction and prior uncertainty in one call.
pub fn predict_and_error(
    state: &KalmanState,
    buffer: &FarEndBuffer,
    mic_block: &[f64],
    process_noise: &[DiagonalPsd],
    dft: &Dft,
) -> Result<(Prediction, Vec<Vec<f64>>)> {
    let prediction = predict_echo(state, buffer, mic_block, 1.0, dft)?;
    let p_plus = predict_uncertainty(&state.p_diag, process_noise, state.transition)?;
    Ok((prediction, p_plus))
}

/// Per bin: `λ_b = P⁺_b / (Σ_b' |X_b'|² P⁺_b' + (M/R) Ψ^I + ε)`.
pub fn compute_step_size(
    p_plus: &[Vec<f64>],
    buffer: &FarEndBuffer,
    psi_i: &DiagonalPsd,
    spec: BlockSpec,
) -> Result<StepSize> {
    let m = spec.dft_len();
    check_len("prior uncertainty partitions", spec.partitions(), p_plus.len())?;
    check_len("observation noise bins", m, psi_i.len())?;
    let ratio = m as f64 / spec.shift() as f64;
    let mut denom: Vec<f64> = psi_i
        .values()
        .iter()
        .map(|&psi| ratio * psi + STEP_SIZE_REGULARIZER)
        .collect();
    for (p, x) in p_plus.iter().zip(buffer.partitions()) {
        check_len("prior uncertainty bins", m, p.len())?;
        for ((d, &pv), xv) in denom.iter_mut().zip(p).zip(x) {
            *d += xv.norm_sqr() * pv;
        }
    }
    let lambda = p_plus
        .iter()
        .map(|p| {
            p.iter()
                .zip(&denom)
                .map(|(&pv, &d)| if pv == 0.0 { 0.0 } else { pv / d })
                .collect()
        })
        .collect();
    Ok(StepSize { lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(r: usize, b: usize, seed: u64) -> (BlockSpec, Dft, FarEndBuffer) {
        let spec = BlockSpec::new(r, b).unwrap();
        let dft = Dft::new(spec.dft_len());
        let mut buf = FarEndBuffer::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..b + 1 {
            let blk: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            buf.advance(&dft, &blk).unwrap();
        }
        (spec, dft, buf)
    }

    #[test]
    fn transition_must_be_in_open_unit_interval() {
        let spec = BlockSpec::new(4, 2).unwrap();
        assert!(KalmanState::new(spec, 1.0).is_err());
        assert!(KalmanState::new(spec, 0.0).is_err());
        assert!(KalmanState::new(spec, 0.999).is_ok());
    }

    #[test]
    fn zero_filter_error_equals_mic() {
        let (spec, dft, buf) = setup(8, 2, 1);
        let state = KalmanState::new(spec, 0.999).unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
        let pred = predict_echo(&state, &buf, &y, 1.0, &dft).unwrap();
        assert_eq!(pred.error.time, y);
        let ys = os_spectrum(&dft, &y).unwrap();
        assert_eq!(pred.error.spectrum, ys);
    }

    #[test]
    fn nan_microphone_is_numeric_error() {
        let (spec, dft, buf) = setup(4, 1, 1);
        let state = KalmanState::new(spec, 0.9).unwrap();
        let y = [0.0, f64::NAN, 0.0, 0.0];
        assert!(matches!(
            predict_echo(&state, &buf, &y, 1.0, &dft),
            Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn unit_transition_without_process_noise_keeps_p() {
        let p = vec![vec![0.3, 2.0], vec![1.0, 0.0]];
        let q = vec![DiagonalPsd::zeros(2), DiagonalPsd::zeros(2)];
        assert_eq!(predict_uncertainty(&p, &q, 1.0).unwrap(), p);
    }

    #[test]
    fn prior_uncertainty_arithmetic() {
        let p = vec![vec![1.0; 3]];
        let q = vec![DiagonalPsd::new(vec![0.002; 3]).unwrap()];
        let out = predict_uncertainty(&p, &q, 0.999).unwrap();
        for v in &out[0] {
            assert!((v - 1.000001).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_step_size_reduction() {
        // B = 1, R = 1, M = 2: λ = p / (c·p + 2ψ)
        let spec = BlockSpec::new(1, 1).unwrap();
        let dft = Dft::new(2);
        let mut buf = FarEndBuffer::new(spec);
        buf.advance(&dft, &[1.5]).unwrap();
        let (p, psi) = (0.7, 0.4);
        let step = compute_step_size(&[vec![p; 2]], &buf, &DiagonalPsd::new(vec![psi; 2]).unwrap(), spec)
            .unwrap();
        for (m, x) in buf.partition(0).iter().enumerate() {
            let c = x.norm_sqr();
            let expected = p / (c * p + 2.0 * psi + STEP_SIZE_REGULARIZER);
            assert!((step.lambda[0][m] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_interference_freezes_adaptation() {
        let (spec, _, buf) = setup(4, 2, 7);
        let p = vec![vec![1.0; 8]; 2];
        let step = compute_step_size(&p, &buf, &DiagonalPsd::new(vec![1e30; 8]).unwrap(), spec).unwrap();
        assert!(step.lambda.iter().flatten().all(|&l| l < 1e-29));
    }

    #[test]
    fn silence_gives_finite_step() {
        let spec = BlockSpec::new(4, 2).unwrap();
        let buf = FarEndBuffer::new(spec);
        let p = vec![vec![0.0; 8], vec![1.0; 8]];
        let step = compute_step_size(&p, &buf, &DiagonalPsd::zeros(8), spec).unwrap();
        assert!(step.lambda[0].iter().all(|&l| l == 0.0));
        assert!(step.lambda[1].iter().all(|&l| l.is_finite()));
    }

    #[test]
    fn step_size_matches_naive_sum() {
        let (spec, _, buf) = setup(8, 4, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..16).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let psi: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..3.0)).collect();
        let step = compute_step_size(&p, &buf, &DiagonalPsd::new(psi.clone()).unwrap(), spec).unwrap();
        for b in 0..4 {
            for m in 0..16 {
                let mut sum = 0.0;
                for bb in 0..4 {
                    let x = buf.partition(bb)[m];
                    sum += (x * p[bb][m] * x.conj()).re;
                }
                let expected = p[b][m] / (sum + 2.0 * psi[m] + STEP_SIZE_REGULARIZER);
                assert!((step.lambda[b][m] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_step_only_replaces_p() {
        let (spec, dft, buf) = setup(4, 2, 3);
        let mut state = KalmanState::new(spec, 0.99).unwrap();
        let before = state.clone();
        let step = StepSize { lambda: vec![vec![0.0; 8]; 2] };
        let p_plus = vec![vec![0.5; 8]; 2];
        let e = vec![Complex::new(1.0, -1.0); 8];
        state.update(&step, &buf, &e, &p_plus, &dft).unwrap();
        assert_eq!(state.filters(), before.filters());
        assert_eq!(state.uncertainty(), p_plus.as_slice());
    }

    #[test]
    fn zero_error_keeps_filter() {
        let (spec, dft, buf) = setup(4, 2, 3);
        let mut state = KalmanState::new(spec, 0.99).unwrap();
        let before = state.filters().to_vec();
        let step = StepSize { lambda: vec![vec![0.1; 8]; 2] };
        state
            .update(&step, &buf, &vec![Complex::default(); 8], &[vec![1.0; 8], vec![1.0; 8]], &dft)
            .unwrap();
        assert_eq!(state.filters(), before.as_slice());
    }

    #[test]
    fn uncertainty_factor_hand_computation() {
        // λ = 0.1, |X|² = 4, R/M = 1/2 → factor 1 − 0.5·0.1·4 = 0.8
        let spec = BlockSpec::new(1, 1).unwrap();
        let dft = Dft::new(2);
        let mut buf = FarEndBuffer::new(spec);
        buf.advance(&dft, &[1.0]).unwrap();
        buf.advance(&dft, &[1.0]).unwrap();
        // block [1, 1] → X = [2, 0]
        assert!((buf.partition(0)[0] - Complex::new(2.0, 0.0)).norm() < 1e-15);
        let mut state = KalmanState::new(spec, 0.5).unwrap();
        let step = StepSize { lambda: vec![vec![0.1, 0.1]] };
        let e = vec![Complex::new(1.0, 0.0), Complex::default()];
        state.update(&step, &buf, &e, &[vec![1.0, 1.0]], &dft).unwrap();
        assert!((state.uncertainty()[0][0] - 0.8).abs() < 1e-15);
        assert!((state.uncertainty()[0][1] - 1.0).abs() < 1e-15);
    }
}
