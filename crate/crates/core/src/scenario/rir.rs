use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Amplitude envelope `exp(−t·3·ln 10 / T60)` at time `t` seconds; it
/// reaches −60 dB at `t = T60`.
pub fn decay_envelope(t: f64, t60: f64) -> f64 {
    (-t * 3.0 * std::f64::consts::LN_10 / t60).exp()
}

/// Synthetic room impulse response: exponentially decaying white Gaussian
/// noise, peak-normalized to 1.
pub fn generate_rir(t60: f64, length: usize, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    if !(t60 > 0.0) {
        return Err(Error::Config(format!("T60 must be > 0, got {t60}")));
    }
    if sample_rate == 0 {
        return Err(Error::Config("sample rate must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let mut rir: Vec<f64> = (0..length)
        .map(|n| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * decay_envelope(n as f64 / fs, t60)
        })
        .collect();
    let peak = rir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        rir.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(rir)
}
