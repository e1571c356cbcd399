//! Frame geometry, DFT machinery, overlap-save partitioned convolution and
//! the STFT used by the postfilter.
//!
//! All spectra use the unnormalized forward DFT; the inverse carries the
//! `1/M` factor.

mod conv;
mod far_end;
mod stft;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

pub use conv::{convolve, convolve_causal};
pub use far_end::{
    apply_gradient_constraint, gradient_constrain_in_place, os_spectrum, pbc_early_echo,
    EchoEstimate, FarEndBuffer,
};
pub use stft::{
    analyze_signal, hamming, stft_analyze, stft_synthesize, synthesis_window, StftSynthesizer,
};

pub type Complex = Complex64;

/// Block geometry shared by every stage: shift `R`, DFT length `M = 2R`,
/// `B` filter partitions and total filter length `L = B·R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    shift: usize,
    dft_len: usize,
    partitions: usize,
    filter_len: usize,
}

impl BlockSpec {
    pub fn new(shift: usize, partitions: usize) -> Result<Self> {
        if shift == 0 || partitions == 0 {
            return Err(Error::Config(format!(
                "block shift and partition count must be >= 1 (got R={shift}, B={partitions})"
            )));
        }
        Ok(Self {
            shift,
            dft_len: 2 * shift,
            partitions,
            filter_len: shift * partitions,
        })
    }

    /// Block shift `R` in samples.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// DFT length `M = 2R`.
    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    /// Number of filter partitions `B`.
    pub fn partitions(&self) -> usize {
        self.partitions
    }

    /// Modelled FIR length `L = B·R`.
    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// Number of non-redundant bins of a real length-`M` spectrum.
    pub fn half_bins(&self) -> usize {
        self.shift + 1
    }

    /// Far-end history required to reconstruct every partition's block.
    pub fn history_len(&self) -> usize {
        (self.partitions + 1) * self.shift
    }
}

impl Default for BlockSpec {
    fn default() -> Self {
        Self::new(256, 8).expect("default geometry is valid")
    }
}

/// Planned forward/inverse transforms of one length.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform in place. `buf.len()` must equal `len`.
    pub fn forward_in_place(&self, buf: &mut [Complex]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// Inverse transform in place, scaled by `1/len`.
    pub fn inverse_in_place(&self, buf: &mut [Complex]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<Complex>> {
        check_len("dft input", self.len, input.len())?;
        let mut buf: Vec<Complex> = input.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.forward_in_place(&mut buf);
        Ok(buf)
    }

    pub fn forward_complex(&self, input: &[Complex]) -> Result<Vec<Complex>> {
        check_len("dft input", self.len, input.len())?;
        let mut buf = input.to_vec();
        self.forward_in_place(&mut buf);
        Ok(buf)
    }

    pub fn inverse(&self, spectrum: &[Complex]) -> Result<Vec<Complex>> {
        check_len("inverse dft input", self.len, spectrum.len())?;
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        Ok(buf)
    }
}

/// Expands `M/2 + 1` non-redundant gains to all `M` bins, mirroring
/// `g[M - m] = g[m]`.
pub fn mirror_half_spectrum(half: &[f64], dft_len: usize) -> Vec<f64> {
    debug_assert_eq!(half.len(), dft_len / 2 + 1);
    let mut full = vec![0.0; dft_len];
    full[..half.len()].copy_from_slice(half);
    for m in 1..dft_len / 2 {
        full[dft_len - m] = half[m];
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                        Complex::from_polar(v, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn block_spec_invariants() {
        let spec = BlockSpec::new(256, 8).unwrap();
        assert_eq!(spec.dft_len(), 512);
        assert_eq!(spec.filter_len(), 2048);
        assert_eq!(spec.half_bins(), 257);
        assert!(BlockSpec::new(0, 4).is_err());
        assert!(BlockSpec::new(4, 0).is_err());
    }

    #[test]
    fn zeros_transform_to_zeros() {
        let dft = Dft::new(8);
        let out = dft.forward(&[0.0; 8]).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn impulse_transforms_to_ones() {
        let dft = Dft::new(8);
        let mut x = [0.0; 8];
        x[0] = 1.0;
        let out = dft.forward(&x).unwrap();
        for c in out {
            assert!((c - Complex::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = Dft::new(16).forward(&x).unwrap();
        let slow = naive_dft(&x);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn inverse_applies_one_over_m() {
        let dft = Dft::new(16);
        let x: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let back = dft.inverse(&dft.forward(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-14 && a.im.abs() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_a_dimension_error() {
        let dft = Dft::new(8);
        assert!(matches!(
            dft.forward(&[0.0; 7]),
            Err(Error::Dimension { expected: 8, actual: 7, .. })
        ));
    }

    #[test]
    fn mirror_is_symmetric() {
        let full = mirror_half_spectrum(&[0.1, 0.2, 0.3, 0.4, 0.5], 8);
        assert_eq!(full, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.3, 0.2]);
    }
}
