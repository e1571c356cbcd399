use std::f64::consts::PI;

use super::{Complex, Dft};
use crate::error::{check_len, Error, Result};

/// Periodic Hamming window of length `len`.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Synthesis window completing `analysis` to perfect reconstruction at 50%
/// overlap: `w_s[n] = v[n] / (v[n]^2 + v[n + R]^2)` (indices mod `M`).
pub fn synthesis_window(analysis: &[f64]) -> Vec<f64> {
    let m = analysis.len();
    let r = m / 2;
    (0..m)
        .map(|n| {
            let a = analysis[n];
            let b = analysis[(n + r) % m];
            a / (a * a + b * b)
        })
        .collect()
}

/// Windowed DFT of the concatenation `[prev; cur]`.
pub fn stft_analyze(dft: &Dft, prev: &[f64], cur: &[f64], window: &[f64]) -> Result<Vec<Complex>> {
    let m = dft.len();
    let r = m / 2;
    check_len("stft previous block", r, prev.len())?;
    check_len("stft current block", r, cur.len())?;
    check_len("stft window", m, window.len())?;
    let mut buf: Vec<Complex> = prev
        .iter()
        .chain(cur)
        .zip(window)
        .map(|(&x, &v)| Complex::new(x * v, 0.0))
        .collect();
    dft.forward_in_place(&mut buf);
    Ok(buf)
}

/// Frames of a whole signal with hop `R`: frame `k` covers blocks `k-1` and
/// `k` (block `-1` is silence). The signal is zero-padded to whole blocks and
/// one trailing frame is appended so every sample is covered twice.
pub fn analyze_signal(dft: &Dft, signal: &[f64], window: &[f64]) -> Result<Vec<Vec<Complex>>> {
    let r = dft.len() / 2;
    let blocks = signal.len().div_ceil(r) + 1;
    let mut padded = vec![0.0; (blocks + 1) * r];
    padded[r..r + signal.len()].copy_from_slice(signal);
    (0..blocks)
        .map(|k| stft_analyze(dft, &padded[k * r..(k + 1) * r], &padded[(k + 1) * r..(k + 2) * r], window))
        .collect()
}

/// Streaming weighted overlap-add synthesis at hop `R`.
///
/// Pushing frame `k` completes and returns block `k - 1`.
#[derive(Clone, Debug)]
pub struct StftSynthesizer {
    dft: Dft,
    window: Vec<f64>,
    overlap: Vec<f64>,
}

impl StftSynthesizer {
    pub fn new(dft: Dft, synthesis_window: Vec<f64>) -> Result<Self> {
        check_len("synthesis window", dft.len(), synthesis_window.len())?;
        let r = dft.len() / 2;
        Ok(Self {
            dft,
            window: synthesis_window,
            overlap: vec![0.0; r],
        })
    }

    pub fn push(&mut self, frame: &[Complex]) -> Result<Vec<f64>> {
        let m = self.dft.len();
        let r = m / 2;
        if frame.len() != m {
            return Err(Error::Dimension {
                context: "stft synthesis frame",
                expected: m,
                actual: frame.len(),
            });
        }
        let mut buf = frame.to_vec();
        self.dft.inverse_in_place(&mut buf);
        let out: Vec<f64> = (0..r)
            .map(|n| self.overlap[n] + buf[n].re * self.window[n])
            .collect();
        for n in 0..r {
            self.overlap[n] = buf[r + n].re * self.window[r + n];
        }
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.overlap.fill(0.0);
    }
}

/// Overlap-adds `frames` (as produced by [`analyze_signal`]) back into a
/// signal aligned with the analysed one; the output has `frames.len() - 1`
/// blocks.
pub fn stft_synthesize(dft: &Dft, frames: &[Vec<Complex>], window: &[f64]) -> Result<Vec<f64>> {
    let mut synth = StftSynthesizer::new(dft.clone(), window.to_vec())?;
    let mut out = Vec::with_capacity(frames.len().saturating_sub(1) * dft.len() / 2);
    for (k, frame) in frames.iter().enumerate() {
        let block = synth.push(frame)?;
        if k > 0 {
            out.extend(block);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_blocks_give_zero_frame() {
        let dft = Dft::new(8);
        let f = stft_analyze(&dft, &[0.0; 4], &[0.0; 4], &hamming(8)).unwrap();
        assert!(f.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn impulse_in_current_block_is_complex_exponential() {
        let dft = Dft::new(8);
        let mut cur = [0.0; 4];
        cur[0] = 1.0;
        let f = stft_analyze(&dft, &[0.0; 4], &cur, &[1.0; 8]).unwrap();
        for (k, c) in f.iter().enumerate() {
            let expected = Complex::from_polar(1.0, -2.0 * PI * (4 * k) as f64 / 8.0);
            assert!((c - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn hamming_analysis_matches_naive_windowed_dft() {
        let dft = Dft::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w = hamming(16);
        let f = stft_analyze(&dft, &x[..8], &x[8..], &w).unwrap();
        for (k, c) in f.iter().enumerate() {
            let naive: Complex = (0..16)
                .map(|n| Complex::from_polar(x[n] * w[n], -2.0 * PI * (k * n) as f64 / 16.0))
                .sum();
            assert!((c - naive).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_frames_synthesize_silence() {
        let dft = Dft::new(8);
        let frames = vec![vec![Complex::default(); 8]; 5];
        let out = stft_synthesize(&dft, &frames, &synthesis_window(&hamming(8))).unwrap();
        assert_eq!(out.len(), 16);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_round_trip() {
        let fs = 16_000;
        let dft = Dft::new(512);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..fs).map(|_| 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let v = hamming(512);
        let frames = analyze_signal(&dft, &x, &v).unwrap();
        let y = stft_synthesize(&dft, &frames, &synthesis_window(&v)).unwrap();
        let err = x
            .iter()
            .zip(&y)
            .skip(512)
            .take(x.len() - 1024)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn single_frame_stays_local() {
        let dft = Dft::new(8);
        let mut frames = vec![vec![Complex::default(); 8]; 6];
        frames[3] = vec![Complex::new(1.0, 0.0); 8];
        let out = stft_synthesize(&dft, &frames, &synthesis_window(&hamming(8))).unwrap();
        // frame 3 covers blocks 2 and 3, i.e. samples 8..16
        for (n, v) in out.iter().enumerate() {
            if !(8..16).contains(&n) {
                assert_eq!(*v, 0.0, "sample {n}");
            }
        }
        assert!(out[8..16].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn synthesizer_rejects_bad_frame() {
        let dft = Dft::new(8);
        let mut s = StftSynthesizer::new(dft, synthesis_window(&hamming(8))).unwrap();
        assert!(s.push(&[Complex::default(); 6]).is_err());
    }
}
