use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Excitation used for far-end or near-end material when no recording is
/// supplied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Modulated, spectrally tilted noise bursts separated by pauses.
    Speech,
    /// Stationary white Gaussian noise.
    WhiteNoise,
}

const SURROGATE_RMS: f64 = 0.1;

pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Speech-like surrogate: low-pass tilted noise under a syllabic
/// (3–5 Hz) modulation, in bursts of 0.4–1.6 s separated by 0.1–0.5 s pauses.
pub fn speech_surrogate(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let ramp = (0.01 * fs).max(1.0);

    let mut envelope = vec![0.0; len];
    let mut pos = (rng.random_range(0.0..0.2) * fs) as usize;
    while pos < len {
        let burst = (rng.random_range(0.4..1.6) * fs) as usize;
        let rate = rng.random_range(3.0..5.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let level = rng.random_range(0.5..1.0);
        for i in 0..burst.min(len - pos) {
            let t = i as f64 / fs;
            let edge = (i as f64 / ramp).min((burst - i) as f64 / ramp).min(1.0);
            let syllable = 0.3 + 0.7 * (std::f64::consts::PI * rate * t + phase).sin().abs();
            envelope[pos + i] = level * edge * syllable;
        }
        pos += burst + (rng.random_range(0.1..0.5) * fs) as usize;
    }

    let mut state = 0.0;
    let mut out: Vec<f64> = envelope
        .iter()
        .map(|&env| {
            let g: f64 = StandardNormal.sample(&mut rng);
            state = 0.7 * state + g;
            env * state
        })
        .collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= SURROGATE_RMS / rms);
    }
    out
}

pub fn generate_source(kind: SourceKind, len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    match kind {
        SourceKind::Speech => speech_surrogate(len, sample_rate, seed),
        SourceKind::WhiteNoise => {
            let mut x = white_noise(len, seed);
            x.iter_mut().for_each(|v| *v *= SURROGATE_RMS);
            x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_has_pauses_and_activity() {
        let x = speech_surrogate(16_000 * 10, 16_000, 7);
        let block_power: Vec<f64> = x.chunks(160).map(|c| c.iter().map(|v| v * v).sum()).collect();
        let silent = block_power.iter().filter(|&&p| p == 0.0).count();
        assert!(silent > 20, "expected pauses, got {silent} silent 10 ms blocks");
        assert!(silent < block_power.len() / 2);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sources_are_deterministic() {
        assert_eq!(speech_surrogate(4000, 16_000, 3), speech_surrogate(4000, 16_000, 3));
        assert_eq!(
            generate_source(SourceKind::WhiteNoise, 100, 16_000, 1),
            generate_source(SourceKind::WhiteNoise, 100, 16_000, 1)
        );
    }
}
