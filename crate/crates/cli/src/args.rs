//! Flag sets shared by several subcommands. Every flag overrides the
//! matching field of an optional JSON config file.

use std::path::{Path, PathBuf};

use aec_core::engine::{Estimator, MaskSource, RunConfig};
use aec_core::scenario::{ScenarioConfig, SourceKind};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Proposed,
    Baseline,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MaskKind {
    Unity,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Speech,
    White,
}

impl From<Source> for SourceKind {
    fn from(s: Source) -> Self {
        match s {
            Source::Speech => SourceKind::Speech,
            Source::White => SourceKind::WhiteNoise,
        }
    }
}

/// Echo canceller settings.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// JSON file with any subset of the run settings.
    #[arg(long = "config", value_name = "JSON")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub block_shift: Option<usize>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// State transition coefficient A.
    #[arg(long)]
    pub transition: Option<f64>,
    #[arg(long)]
    pub lambda_s: Option<f64>,
    #[arg(long)]
    pub lambda_p: Option<f64>,
    #[arg(long)]
    pub lambda_w: Option<f64>,
    #[arg(long)]
    pub kappa: Option<usize>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub oracle_mask_eps: Option<f64>,
    #[arg(long)]
    pub initial_uncertainty: Option<f64>,
    #[arg(long)]
    pub predict_with_transition: Option<bool>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Averaging factor of the baseline or oracle estimator.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, conflicts_with = "weights")]
    pub mask: Option<MaskKind>,
    /// Network weights file; selects the learned mask.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c: RunConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(block_shift, partitions, sample_rate, transition, lambda_s, lambda_p, lambda_w, kappa, eps1, oracle_mask_eps, initial_uncertainty, predict_with_transition);
        match (self.estimator, self.alpha) {
            (Some(EstimatorKind::Proposed), Some(_)) => bail!("--alpha does not apply to the proposed estimator"),
            (Some(EstimatorKind::Proposed), None) => c.estimator = Estimator::Proposed,
            (Some(EstimatorKind::Baseline), a) => c.estimator = Estimator::Baseline { alpha: a.unwrap_or(0.5) },
            (Some(EstimatorKind::Oracle), a) => c.estimator = Estimator::Oracle { smoothing: a.unwrap_or(0.9) },
            (None, Some(a)) => match &mut c.estimator {
                Estimator::Baseline { alpha } => *alpha = a,
                Estimator::Oracle { smoothing } => *smoothing = a,
                Estimator::Proposed => bail!("--alpha needs --estimator baseline or oracle"),
            },
            (None, None) => {}
        }
        if let Some(m) = self.mask {
            c.mask = match m {
                MaskKind::Unity => MaskSource::Unity,
                MaskKind::Oracle => MaskSource::Oracle,
            };
        }
        if let Some(w) = &self.weights {
            c.mask = MaskSource::Network { weights: w.clone() };
        }
        c.validate()?;
        Ok(c)
    }
}

/// Synthetic scenario settings.
#[derive(Args, Clone, Debug, Default)]
pub struct ScenarioArgs {
    /// JSON file with any subset of the scenario settings.
    #[arg(long = "scenario-config", value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "no_near_end")]
    pub ner_db: Option<f64>,
    /// Leave the near-end talker silent.
    #[arg(long)]
    pub no_near_end: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub enr_db: Option<f64>,
    #[arg(long)]
    pub rir_len: Option<usize>,
    #[arg(long)]
    pub rir_t60: Option<f64>,
    /// Echo path change instant in seconds; repeatable.
    #[arg(long = "epc", value_name = "SECONDS")]
    pub epc_times: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub filter_len: Option<usize>,
    #[arg(long = "scenario-block-shift")]
    pub block_shift: Option<usize>,
    #[arg(long, value_enum)]
    pub far_end: Option<Source>,
    #[arg(long, value_enum)]
    pub near_end: Option<Source>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut c: ScenarioConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(duration, enr_db, rir_len, rir_t60, seed, filter_len, block_shift);
        if let Some(v) = self.ner_db {
            c.ner_db = Some(v);
        }
        if self.no_near_end {
            c.ner_db = None;
        }
        if !self.epc_times.is_empty() {
            c.epc_times = self.epc_times.clone();
        }
        if let Some(s) = self.far_end {
            c.far_end = s.into();
        }
        if let Some(s) = self.near_end {
            c.near_end = s.into();
        }
        c.validate()?;
        Ok(c)
    }
}
