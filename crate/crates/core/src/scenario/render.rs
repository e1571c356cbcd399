use crate::dsp::convolve_causal;
use crate::error::{check_len, Error, Result};

use super::signals::white_noise;

/// Splits the echo of `far_end` through `rir` at tap `split`: the early part
/// uses taps `[0, split)`, the late part the remaining taps. Both outputs are
/// causal and as long as `far_end`.
pub fn render_echo(far_end: &[f64], rir: &[f64], split: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if rir.len() < split {
        return Err(Error::Config(format!(
            "RIR has {} taps, fewer than the early/late split at {split}",
            rir.len()
        )));
    }
    let early = convolve_causal(far_end, &rir[..split]);
    let late = if rir[split..].iter().all(|&v| v == 0.0) {
        vec![0.0; far_end.len()]
    } else {
        let mut kernel = vec![0.0; rir.len()];
        kernel[split..].copy_from_slice(&rir[split..]);
        convolve_causal(far_end, &kernel)
    };
    Ok((early, late))
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Scaled near-end and noise components.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub near_end: Vec<f64>,
    pub noise: Vec<f64>,
    pub mic: Vec<f64>,
}

/// Scales `near_end` to the requested near-end-to-echo ratio and adds white
/// Gaussian noise at the requested echo-to-noise ratio. `ner_db = None`
/// leaves the near-end silent.
pub fn mix(
    early: &[f64],
    late: &[f64],
    near_end: &[f64],
    noise_seed: u64,
    ner_db: Option<f64>,
    enr_db: f64,
) -> Result<Mixture> {
    check_len("late echo", early.len(), late.len())?;
    check_len("near-end", early.len(), near_end.len())?;
    let echo: Vec<f64> = early.iter().zip(late).map(|(a, b)| a + b).collect();
    let echo_energy = energy(&echo);
    if echo_energy <= 0.0 {
        return Err(Error::Config("echo is silent; NER/ENR are undefined".into()));
    }
    let near_end = match ner_db {
        Some(ner) => {
            let near_energy = energy(near_end);
            if near_energy <= 0.0 {
                return Err(Error::Config("near-end is silent; cannot reach the NER".into()));
            }
            let gain = (echo_energy * 10f64.powf(ner / 10.0) / near_energy).sqrt();
            near_end.iter().map(|v| v * gain).collect()
        }
        None => vec![0.0; echo.len()],
    };
    let mut noise = white_noise(echo.len(), noise_seed);
    let gain = (echo_energy / (10f64.powf(enr_db / 10.0) * energy(&noise))).sqrt();
    noise.iter_mut().for_each(|v| *v *= gain);
    let mic = echo
        .iter()
        .zip(&near_end)
        .zip(&noise)
        .map(|((d, s), n)| d + s + n)
        .collect();
    Ok(Mixture { near_end, noise, mic })
}
