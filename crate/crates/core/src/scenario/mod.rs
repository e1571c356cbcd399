//! Synthetic ground-truth scenarios: RIRs, echo rendering, mixing, echo path
//! changes and WAV/manifest I/O.

mod render;
mod rir;
mod signals;
mod wav;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use render::{energy, mix, render_echo, Mixture};
pub use rir::{decay_envelope, generate_rir};
pub use signals::{generate_source, speech_surrogate, white_noise, SourceKind};
pub use wav::{wav_read, wav_write};

const PEAK_LIMIT: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub sample_rate: u32,
    /// Seconds.
    pub duration: f64,
    /// Near-end-to-echo ratio in dB; `None` leaves the near-end silent.
    pub ner_db: Option<f64>,
    /// Echo-to-noise ratio in dB.
    pub enr_db: f64,
    pub rir_len: usize,
    pub rir_t60: f64,
    /// Echo path change instants in seconds.
    pub epc_times: Vec<f64>,
    pub seed: u64,
    /// Early/late split point, normally the adaptive filter length.
    pub filter_len: usize,
    /// EPC instants are rounded to multiples of this many samples.
    pub block_shift: usize,
    pub far_end: SourceKind,
    pub near_end: SourceKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            duration: 10.0,
            ner_db: Some(0.0),
            enr_db: 30.0,
            rir_len: 2048 + 512,
            rir_t60: 0.2,
            epc_times: Vec::new(),
            seed: 0,
            filter_len: 2048,
            block_shift: 256,
            far_end: SourceKind::Speech,
            near_end: SourceKind::Speech,
        }
    }
}

impl ScenarioConfig {
    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        if self.block_shift == 0 {
            return Err(Error::Config("block_shift must be > 0".into()));
        }
        if self.rir_len < self.filter_len {
            return Err(Error::Config(format!(
                "rir_len {} is shorter than the filter length {}",
                self.rir_len, self.filter_len
            )));
        }
        if !self.enr_db.is_finite() || self.ner_db.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Config("NER/ENR must be finite".into()));
        }
        for pair in self.epc_times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config("epc_times must be strictly increasing".into()));
            }
        }
        if let Some(t) = self.epc_times.iter().find(|t| !(**t > 0.0 && **t < self.duration)) {
            return Err(Error::Config(format!("EPC at {t} s lies outside (0, {})", self.duration)));
        }
        Ok(())
    }

    /// EPC instants in samples, rounded to the nearest block boundary.
    pub fn epc_samples(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let r = self.block_shift as f64;
        let n = self.num_samples();
        let starts: Vec<usize> = self
            .epc_times
            .iter()
            .map(|t| ((t * self.sample_rate as f64 / r).round() * r) as usize)
            .collect();
        let mut prev = 0;
        for &s in &starts {
            if s <= prev || s >= n {
                return Err(Error::Config(format!(
                    "EPC schedule collapses after rounding to the {}-sample block grid",
                    self.block_shift
                )));
            }
            prev = s;
        }
        Ok(starts)
    }

    pub fn seeds(&self) -> RealizedSeeds {
        RealizedSeeds {
            far_end: sub_seed(self.seed, 1),
            near_end: sub_seed(self.seed, 2),
            noise: sub_seed(self.seed, 3),
            rirs: (0..=self.epc_times.len() as u64).map(|k| sub_seed(self.seed, 100 + k)).collect(),
        }
    }
}

fn sub_seed(seed: u64, role: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ role.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedSeeds {
    pub far_end: u64,
    pub near_end: u64,
    pub noise: u64,
    pub rirs: Vec<u64>,
}

/// One echo path, active from `start` until the next segment.
#[derive(Clone, Debug, PartialEq)]
pub struct RirSegment {
    pub start: usize,
    pub rir: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub seeds: RealizedSeeds,
    pub far_end: Vec<f64>,
    pub near_end: Vec<f64>,
    pub noise: Vec<f64>,
    pub echo: Vec<f64>,
    pub echo_early: Vec<f64>,
    pub echo_late: Vec<f64>,
    pub mic: Vec<f64>,
    pub rir_segments: Vec<RirSegment>,
}

impl Scenario {
    /// Generates sources and echo paths from the configuration.
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let n = config.num_samples();
        let seeds = config.seeds();
        let far_end = generate_source(config.far_end, n, config.sample_rate, seeds.far_end);
        let near_end = generate_source(config.near_end, n, config.sample_rate, seeds.near_end);
        Self::with_sources(config, far_end, near_end)
    }

    /// Builds a scenario around supplied far-end and near-end material; the
    /// echo paths and noise still come from the configuration.
    pub fn with_sources(config: &ScenarioConfig, far_end: Vec<f64>, near_end: Vec<f64>) -> Result<Self> {
        let seeds = config.seeds();
        let rirs = seeds
            .rirs
            .iter()
            .map(|&s| generate_rir(config.rir_t60, config.rir_len, config.sample_rate, s))
            .collect::<Result<Vec<_>>>()?;
        Self::with_rirs(config, far_end, near_end, rirs)
    }

    /// Builds a scenario from explicit echo paths, one per EPC segment.
    pub fn with_rirs(
        config: &ScenarioConfig,
        far_end: Vec<f64>,
        near_end: Vec<f64>,
        rirs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = config.num_samples();
        crate::error::check_len("far-end", n, far_end.len())?;
        crate::error::check_len("near-end", n, near_end.len())?;
        let starts = config.epc_samples()?;
        crate::error::check_len("RIR segments", starts.len() + 1, rirs.len())?;
        let seeds = config.seeds();

        let mut bounds = vec![0];
        bounds.extend(&starts);
        bounds.push(n);
        let mut echo_early = vec![0.0; n];
        let mut echo_late = vec![0.0; n];
        let mut rir_segments = Vec::with_capacity(rirs.len());
        for (k, rir) in rirs.into_iter().enumerate() {
            let (a, b) = (bounds[k], bounds[k + 1]);
            // the whole far-end history drives the new path, so the switch is
            // abrupt but free of onset transients
            let (early, late) = render_echo(&far_end[..b], &rir, config.filter_len)?;
            echo_early[a..b].copy_from_slice(&early[a..b]);
            echo_late[a..b].copy_from_slice(&late[a..b]);
            rir_segments.push(RirSegment { start: a, rir });
        }

        let Mixture { mut near_end, mut noise, .. } =
            mix(&echo_early, &echo_late, &near_end, seeds.noise, config.ner_db, config.enr_db)?;
        let compose = |early: &[f64], late: &[f64], s: &[f64], v: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let echo: Vec<f64> = early.iter().zip(late).map(|(a, b)| a + b).collect();
            let mic = echo.iter().zip(s).zip(v).map(|((d, s), v)| d + s + v).collect();
            (echo, mic)
        };
        let (mut echo, mut mic) = compose(&echo_early, &echo_late, &near_end, &noise);
        let peak = mic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > PEAK_LIMIT {
            let g = PEAK_LIMIT / peak;
            for sig in [&mut echo_early, &mut echo_late, &mut near_end, &mut noise] {
                sig.iter_mut().for_each(|v| *v *= g);
            }
            (echo, mic) = compose(&echo_early, &echo_late, &near_end, &noise);
        }

        Ok(Self {
            config: config.clone(),
            seeds,
            far_end,
            near_end,
            noise,
            echo,
            echo_early,
            echo_late,
            mic,
            rir_segments,
        })
    }

    pub fn len(&self) -> usize {
        self.mic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mic.is_empty()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            epc_samples: self.rir_segments.iter().skip(1).map(|s| s.start).collect(),
            num_samples: self.len(),
        }
    }

    /// Writes every component as a WAV file plus `manifest.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let fs = self.config.sample_rate;
        for (name, sig) in [
            ("far_end", &self.far_end),
            ("near_end", &self.near_end),
            ("noise", &self.noise),
            ("echo", &self.echo),
            ("echo_early", &self.echo_early),
            ("echo_late", &self.echo_late),
            ("mic", &self.mic),
        ] {
            wav_write(dir.join(format!("{name}.wav")), sig, fs)?;
        }
        self.manifest().write(dir.join("manifest.json"))
    }
}

/// JSON description from which a scenario can be regenerated bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    pub seeds: RealizedSeeds,
    pub epc_samples: Vec<usize>,
    pub num_samples: usize,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn regenerate(&self) -> Result<Scenario> {
        Scenario::generate(&self.config)
    }
}
