//! Echo return loss enhancement, postfilter distortion and runtime figures.

use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use crate::dsp::Dft;
use crate::error::{check_len, Error, Result};
use crate::postfilter::{replay_masks, MaskFrame};

/// Floor applied to powers before taking ratios.
pub const POWER_FLOOR: f64 = 1e-12;
/// Magnitude cap of every reported dB value.
pub const DB_CAP: f64 = 80.0;
/// Recursive-averaging factor of the time-dependent ERLE.
pub const DEFAULT_ERLE_SMOOTHING: f64 = 0.99;

fn ratio_db(num: f64, den: f64) -> f64 {
    (10.0 * (num.max(POWER_FLOOR) / den.max(POWER_FLOOR)).log10()).clamp(-DB_CAP, DB_CAP)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn residual_energy(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Block-wise ERLE with recursively averaged numerator and denominator.
/// Entries are `None` while the averaged echo power is still below the
/// floor.
pub fn erle_time_dependent(d: &[f64], d_hat: &[f64], block: usize, smoothing: f64) -> Result<Vec<Option<f64>>> {
    check_len("echo estimate", d.len(), d_hat.len())?;
    if block == 0 {
        return Err(Error::Config("block length must be > 0".into()));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Config(format!("ERLE smoothing must lie in [0, 1), got {smoothing}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    Ok(d.chunks(block)
        .zip(d_hat.chunks(block))
        .map(|(db, eb)| {
            num = smoothing * num + (1.0 - smoothing) * energy(db);
            den = smoothing * den + (1.0 - smoothing) * residual_energy(db, eb);
            (num >= POWER_FLOOR).then(|| ratio_db(num, den))
        })
        .collect())
}

/// Signal-averaged ERLE `‖d‖² / ‖d − d̂‖²` in dB.
pub fn erle_average(d: &[f64], d_hat: &[f64]) -> Result<f64> {
    check_len("echo estimate", d.len(), d_hat.len())?;
    let num = energy(d);
    if num < POWER_FLOOR {
        return Err(Error::Undefined("ERLE"));
    }
    Ok(ratio_db(num, residual_energy(d, d_hat)))
}

/// Replays a recorded mask sequence on arbitrary signals.
#[derive(Clone, Debug)]
pub struct MaskReplay<'a> {
    pub masks: &'a [MaskFrame],
    pub dft: &'a Dft,
    pub analysis_window: &'a [f64],
    pub synthesis_window: &'a [f64],
}

impl MaskReplay<'_> {
    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        if self.masks.is_empty() && !signal.is_empty() {
            return Err(Error::Config("mask log is empty".into()));
        }
        replay_masks(signal, self.masks, self.dft, self.analysis_window, self.synthesis_window)
    }
}

/// ERLE after the postfilter: `‖d‖² / ‖pf(d − d̂)‖²` in dB.
pub fn erle_after_pf(d: &[f64], d_hat: &[f64], pf: &MaskReplay<'_>) -> Result<f64> {
    check_len("echo estimate", d.len(), d_hat.len())?;
    let num = energy(d);
    if num < POWER_FLOOR {
        return Err(Error::Undefined("ERLE"));
    }
    let residual: Vec<f64> = d.iter().zip(d_hat).map(|(a, b)| a - b).collect();
    Ok(ratio_db(num, energy(&pf.apply(&residual)?)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distortion {
    pub s_pf_db: f64,
    pub beta: f64,
    /// Set when `β ≤ 0`; the ratio is then reported as 0 dB.
    pub degenerate: bool,
}

/// Near-end distortion `‖βs‖² / ‖βs − pf(s)‖²` with the least-squares gain
/// `β = sᵀpf(s) / ‖s‖²`.
pub fn near_end_distortion(s: &[f64], pf_s: &[f64]) -> Result<Distortion> {
    check_len("postfiltered near-end", s.len(), pf_s.len())?;
    let ss = energy(s);
    if ss < POWER_FLOOR {
        return Err(Error::Undefined("near-end distortion"));
    }
    let beta = s.iter().zip(pf_s).map(|(a, b)| a * b).sum::<f64>() / ss;
    if beta <= 0.0 {
        return Ok(Distortion { s_pf_db: 0.0, beta, degenerate: true });
    }
    let scaled: Vec<f64> = s.iter().map(|v| beta * v).collect();
    Ok(Distortion {
        s_pf_db: ratio_db(beta * beta * ss, residual_energy(&scaled, pf_s)),
        beta,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RuntimeStats {
    pub block_time_ms: f64,
    pub rtf: f64,
}

/// Mean per-block processing time and the real-time factor
/// `block time / (R / fs)`.
pub fn runtime_stats(timings: &[Duration], shift: usize, sample_rate: u32) -> Result<RuntimeStats> {
    if timings.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mean = timings.iter().map(Duration::as_secs_f64).sum::<f64>() / timings.len() as f64;
    let block_secs = shift as f64 / sample_rate as f64;
    Ok(RuntimeStats {
        block_time_ms: 1e3 * mean,
        // a zero reading would violate rtf > 0; clamp to timer resolution
        rtf: mean.max(1e-9) / block_secs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Time-dependent ERLE per block in dB, `null` where undefined.
    pub erle_series: Vec<Option<f64>>,
    pub erle_avg: f64,
    pub erle_pf: Option<f64>,
    pub s_pf: Option<f64>,
    pub beta: Option<f64>,
    pub s_pf_degenerate: bool,
    pub rtf: f64,
    pub block_time_ms: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per block: index, time in seconds, ERLE in dB (empty where
    /// undefined).
    pub fn write_series_csv(&self, mut out: impl Write, shift: usize, sample_rate: u32) -> Result<()> {
        writeln!(out, "block,time_s,erle_db")?;
        for (k, v) in self.erle_series.iter().enumerate() {
            let t = ((k + 1) * shift) as f64 / sample_rate as f64;
            match v {
                Some(v) => writeln!(out, "{k},{t:.4},{v:.4}")?,
                None => writeln!(out, "{k},{t:.4},")?,
            }
        }
        Ok(())
    }
}
